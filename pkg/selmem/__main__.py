"""Selective multimodal memory engine.

License:
    MIT License

    Permission is hereby granted, free of charge, to any person obtaining a copy
    of this software and associated documentation files (the "Software"), to deal
    in the Software without restriction, including without limitation the rights
    to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
    copies of the Software, and to permit persons to whom the Software is
    furnished to do so, subject to the following conditions:

    The above copyright notice and this permission notice shall be included in all
    copies or substantial portions of the Software.

    THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
    IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
    FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
    AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
    LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
    OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
    SOFTWARE.

"""
import argparse
import logging
import sys

from typing import List, Optional

from .application import Application, Command
from .common import *
from .config import apply_overrides, load_cli_config

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Flags that override the key of the same name in the configuration file
CONFIG_FLAGS = {
    "store":              "store_path",
    "alpha":              "alpha",
    "epsilon":            "epsilon",
    "seed":               "seed",
    "encoder":            "encoder",
    "weights":            "weights",
    "t_n":                "t_n",
    "emotion_thresholds": "emotion_thresholds",
    "intent_patterns":    "intent_patterns",
}

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog = APP_NAME, description = 'selmem: A selective multimodal memory engine')
    parser.add_argument('--version', action = 'version',
                        version = '%(prog)s {version}'.format(version = get_version()))
    parser.add_argument('--config', help = 'YAML configuration file')
    parser.add_argument('--store', help = 'Store directory')
    parser.add_argument('--alpha', type = float, help = 'Weight of the image similarity in scene scores')
    parser.add_argument('--epsilon', type = float, help = 'Z-score epsilon')
    parser.add_argument('--seed', type = int, help = 'Seed of the synthetic encoders and evaluations')
    parser.add_argument('--encoder', help = "'synthetic' or 'remote:<endpoint>'")
    parser.add_argument('--weights', help = 'MemScore weights w_e,w_n,w_c')
    parser.add_argument('--t-n', dest = 't_n', type = float, help = 'Novelty threshold (cosine distance)')
    parser.add_argument('--emotion-thresholds', help = 'Per-emotion thresholds, e.g. happy=0.6,sad=0.4')
    parser.add_argument('--intent-patterns', help = 'YAML file of intent patterns')
    parser.add_argument('--log-level', default = 'WARNING',
                        choices = ['DEBUG', 'INFO', 'WARNING', 'ERROR'], help = 'Logging level')

    commands = parser.add_subparsers(dest = 'command', required = True)

    capture = commands.add_parser(Command.CAPTURE.value, help = 'Feed a session file through the capture gate')
    capture.add_argument('session_file', help = 'JSON lines of frames')
    capture.add_argument('--workers', type = int, default = 1, help = 'Users processed in parallel')

    query = commands.add_parser(Command.QUERY.value, help = 'Say something to the memory')
    query.add_argument('user', help = 'User id or name')
    query.add_argument('text', help = 'Utterance')
    query.add_argument('--transcript', help = 'Transcript file stored when the session ends (default: the utterance itself)')
    query.add_argument('--timestamp', type = int, help = 'Episode timestamp in ms (default: now)')

    users = commands.add_parser(Command.USERS.value, help = 'List or delete users')
    users.add_argument('action', choices = ['list', 'delete'])
    users.add_argument('user_id', nargs = '?', default = None)

    evaluate = commands.add_parser(Command.EVAL.value, help = 'Run an evaluation suite')
    evaluate.add_argument('suite', choices = ['memorability', 'retrieval'])
    evaluate.add_argument('--out', dest = 'out_dir', default = 'reports', help = 'Report directory')
    evaluate.add_argument('--features', help = 'Feature table (CSV)')
    evaluate.add_argument('--ratings', help = 'Ratings table (CSV, rater x image)')
    evaluate.add_argument('--repeats', type = int, default = 20, help = 'Cross-validation repeats')
    evaluate.add_argument('--workers', type = int, default = 1, help = 'Repeats run in parallel')
    evaluate.add_argument('--items', type = int, default = 500, help = 'Gallery size of the retrieval benchmark')
    evaluate.add_argument('--normalization', choices = ['zscore', 'minmax'], default = 'zscore')

    bench = commands.add_parser(Command.BENCH.value, help = 'Time hybrid retrieval on a synthetic store')
    bench.add_argument('--size', type = int, default = 10_000, help = 'Scenes and episodes each')
    bench.add_argument('--dim', type = int, default = 512)
    bench.add_argument('--queries', type = int, default = 100)

    commands.add_parser(Command.INSPECT.value, help = 'Print the store manifest')
    return parser

def command_arguments(args: argparse.Namespace) -> dict:
    """Keyword arguments of the command's callback."""
    command = Command(args.command)
    names = {
        Command.CAPTURE: ("session_file", "workers"),
        Command.QUERY:   ("user", "text", "transcript", "timestamp"),
        Command.USERS:   ("action", "user_id"),
        Command.EVAL:    ("suite", "out_dir", "features", "ratings", "repeats", "workers", "items", "normalization"),
        Command.BENCH:   ("size", "dim", "queries"),
        Command.INSPECT: (),
    }[command]
    return {name: getattr(args, name) for name in names}

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level = args.log_level, format = LOG_FORMAT)

    try:
        cfg = load_cli_config(args.config)
        cfg = apply_overrides(cfg, {key: getattr(args, flag) for flag, key in CONFIG_FLAGS.items()})
    except ConfigError as e:
        print(f"error: {e}", file = sys.stderr)
        return EXIT_CONFIG

    app = Application(cfg)
    return app.run(Command(args.command), **command_arguments(args))

if __name__ == "__main__":
    sys.exit(main())
