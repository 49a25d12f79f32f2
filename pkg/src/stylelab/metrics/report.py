"""Six-column evaluation reports (Acc, EMD, BLEU, sBLEU, WMS, PPL)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, MetricUndefinedError
from ..text import tokenize
from .bleu import bleu, sbleu
from .classifier import NGramClassifier, accuracy
from .lm import NGramLM, perplexity
from .transport import emd, wms

COLUMNS = ("Acc", "EMD", "BLEU", "sBLEU", "WMS", "PPL")


@dataclass
class EvalReport:
    acc: float
    emd: float
    bleu: float | None
    sbleu: float
    wms: float | None
    ppl: float | None
    n: int = 0
    wms_undefined: int = 0
    notes: list = field(default_factory=list)

    def row(self):
        return {"Acc": self.acc, "EMD": self.emd, "BLEU": self.bleu, "sBLEU": self.sbleu,
                "WMS": self.wms, "PPL": self.ppl}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerow(["" if v is None else repr(float(v)) for v in self.row().values()])
        return buf.getvalue()

    def table(self) -> str:
        fmt = {"Acc": "{:.1f}", "EMD": "{:.2f}", "BLEU": "{:.1f}", "sBLEU": "{:.1f}",
               "WMS": "{:.2f}", "PPL": "{:.1f}"}
        cells = ["-" if v is None else fmt[k].format(v) for k, v in self.row().items()]
        widths = [max(len(c), len(h)) for c, h in zip(cells, COLUMNS)]
        head = "  ".join(h.rjust(w) for h, w in zip(COLUMNS, widths))
        body = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        lines = [head, body, f"examples: {self.n}"]
        if self.wms_undefined:
            lines.append(f"WMS undefined (no in-vocabulary tokens): {self.wms_undefined}")
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"


def mean_emd(classifier: NGramClassifier, inputs, outputs):
    """Mean over examples of the attribute-averaged EMD between style distributions."""
    p_in = classifier.predict_proba(inputs)
    p_out = classifier.predict_proba(outputs)
    vals = np.zeros(len(inputs))
    for pa, pb in zip(p_in, p_out):
        for i in range(len(inputs)):
            vals[i] += emd(pa[i] / pa[i].sum(), pb[i] / pb[i].sum())
    return float((vals / len(p_in)).mean())


def evaluate_corpus(inputs, outputs, target_styles, classifier: NGramClassifier, lm: NGramLM | None = None,
                    embeddings=None, references=None) -> EvalReport:
    """Score transferred ``outputs`` against their ``inputs``.

    Texts may be strings (lower-cased and space-tokenized here) or token
    lists. Examples whose WMS is undefined are counted and excluded from the
    mean.
    """
    inputs = [tokenize(t) if isinstance(t, str) else list(t) for t in inputs]
    outputs = [tokenize(t) if isinstance(t, str) else list(t) for t in outputs]
    if not (len(inputs) == len(outputs) == len(target_styles)):
        raise ContractError("inputs, outputs and target styles must be aligned")
    if references is not None:
        references = [tokenize(t) if isinstance(t, str) else list(t) for t in references]
        if len(references) != len(outputs):
            raise ContractError("references must align with outputs")
    acc = accuracy(outputs, target_styles, classifier)
    emd_val = mean_emd(classifier, inputs, outputs)
    sb = sbleu(outputs, inputs)
    bl = bleu(outputs, references) if references is not None else None
    wms_val, undefined = None, 0
    if embeddings is not None:
        scores = []
        for a, b in zip(inputs, outputs):
            try:
                scores.append(wms(a, b, embeddings))
            except MetricUndefinedError:
                undefined += 1
        wms_val = float(np.mean(scores)) if scores else None
    ppl = perplexity(lm, outputs) if lm is not None else None
    return EvalReport(acc, emd_val, bl, sb, wms_val, ppl, n=len(outputs), wms_undefined=undefined)
