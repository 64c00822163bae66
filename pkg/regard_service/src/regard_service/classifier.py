"""Sequence-classification wrapper that maps model classes onto the fixed
regard wire classes {negative, neutral, positive, other}.

Inference runs in evaluation mode under no_grad, one text at a time:
scores for a text never depend on what else is in the request, so
permuting a batch permutes the results exactly.
"""
from __future__ import annotations

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

WIRE_CLASSES = ("negative", "neutral", "positive", "other")


class RegardClassifier:
    def __init__(self, model_path: str, max_length: int = 512):
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForSequenceClassification.from_pretrained(model_path)
        self.model.eval()
        self.max_length = max_length
        self._wire_index = self._map_labels(self.model.config.id2label)

    @staticmethod
    def _map_labels(id2label: dict) -> dict[str, int | None]:
        """Wire class -> model output index. Classes the checkpoint lacks
        map to None and are reported as 0."""
        by_name: dict[str, int] = {}
        for idx, label in id2label.items():
            name = str(label).lower()
            for wire in WIRE_CLASSES:
                if wire in name:
                    by_name[wire] = int(idx)
        if by_name:
            return {wire: by_name.get(wire) for wire in WIRE_CLASSES}
        # Uninformative labels (LABEL_0...): fall back to the conventional
        # positional order negative, neutral, positive, other.
        n = len(id2label)
        return {wire: (i if i < n else None) for i, wire in enumerate(WIRE_CLASSES)}

    def score_one(self, text: str) -> dict[str, float]:
        inputs = self.tokenizer(text, return_tensors="pt", truncation=True,
                                max_length=self.max_length)
        with torch.no_grad():
            logits = self.model(**inputs).logits[0]
        probs = torch.softmax(logits, dim=-1).tolist()
        return {
            wire: (probs[idx] if idx is not None else 0.0)
            for wire, idx in self._wire_index.items()
        }

    def score_batch(self, texts: list[str]) -> list[dict[str, float]]:
        return [self.score_one(t) for t in texts]
