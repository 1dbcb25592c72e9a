"""Plain-text and JSON reports of the evaluation suites.

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
import json

from pathlib import Path
from typing import Iterable, List, Optional, Union

from .benchmark import SweepResult
from .crossval import CvResult
from .ratings import ConsistencyResult
from .stats import significance_label

def _row(cells: Iterable[str], widths: List[int]) -> str:
    return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

def memorability_table(consistency: Optional[ConsistencyResult], baselines: List[CvResult],
                       configs: List[CvResult]) -> str:
    """Spearman correlation with human ratings per method and weight configuration."""
    widths = [28, 18, 18, 12, 4]
    lines = [_row(("Method", "(w_e, w_n, w_c)", "rho (mean +- std)", "Fisher p", "Sig"), widths),
             "-" * sum(widths)]
    if consistency is not None:
        lines.append(_row(("Human consistency", "-", f"{consistency.mean_rho:.4f}", "-", "-"), widths))
    for result in baselines + configs:
        weights = "-" if result.weights is None else result.weights.label()
        p = result.fisher_p
        lines.append(_row((result.name, weights, f"{result.mean_rho:.4f} +- {result.std_rho:.4f}",
                           f"{p:.3g}", significance_label(p)), widths))
    lines.append("")
    lines.append("Sig: ** p < 1e-100, * p < 1e-10, ns otherwise (Fisher-combined fold p-values)")
    return "\n".join(lines) + "\n"

def retrieval_table(sweep: SweepResult) -> str:
    """Recall@K of text-only, image-only and the best fusion weight."""
    widths = [16] + [8] * len(sweep.ks)
    lines = [_row(["Method"] + [f"R@{k}" for k in sweep.ks], widths), "-" * sum(widths)]
    lines.append(_row(["Text"] + [f"{sweep.text[k]:.1f}" for k in sweep.ks], widths))
    lines.append(_row(["Image"] + [f"{sweep.image[k]:.1f}" for k in sweep.ks], widths))
    alpha, _ = sweep.best_alpha(sweep.ks[0])
    lines.append(_row([f"Fusion ({alpha:.1f})"] + [f"{sweep.fusion[alpha][k]:.1f}" for k in sweep.ks], widths))
    lines.append("")
    lines.append(_row(["alpha"] + [f"R@{k}" for k in sweep.ks], widths))
    for a, row in sweep.fusion.items():
        lines.append(_row([f"{a:.1f}"] + [f"{row[k]:.1f}" for k in sweep.ks], widths))
    return "\n".join(lines) + "\n"

def write_report(directory: Union[str, Path], name: str, text: str, document: dict) -> List[Path]:
    """Write `<name>.txt` and `<name>.json` to `directory`."""
    directory = Path(directory)
    directory.mkdir(parents = True, exist_ok = True)
    text_path = directory / f"{name}.txt"
    json_path = directory / f"{name}.json"
    text_path.write_text(text, encoding = "utf-8")
    json_path.write_text(json.dumps(document, indent = 2, sort_keys = True) + "\n", encoding = "utf-8")
    return [text_path, json_path]
