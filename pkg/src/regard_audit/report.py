"""Report rendering: markdown summary, SVG figures, and table-shaped CSVs.

Figures are rendered with matplotlib to SVG. Output is byte-deterministic:
the SVG hash salt is pinned, the creation date is stripped, and each file
gets a manifest comment, so re-running `report` on unchanged inputs
reproduces identical bytes.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .manifest import atomic_write_text, fmt_float  # noqa: E402
from .prompts import identity_sort_key  # noqa: E402

_SVG_SALT = "regard-audit"

IDENTITY_COLORS = {
    "control": "#555555",
    "straight_man": "#4c72b0",
    "straight_woman": "#64b5cd",
    "gay_man": "#dd8452",
    "lesbian_woman": "#c44e52",
}
_FALLBACK_COLORS = ["#8172b3", "#937860", "#ccb974", "#55a868"]


def _color_for(identity: str, index: int) -> str:
    return IDENTITY_COLORS.get(identity, _FALLBACK_COLORS[index % len(_FALLBACK_COLORS)])


def _save_svg(fig, path: Path, digest: str) -> None:
    plt.rcParams["svg.hashsalt"] = _SVG_SALT
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".svg.tmp")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    text = tmp.read_text(encoding="utf-8")
    tmp.unlink()
    first_newline = text.index("\n") + 1
    tagged = text[:first_newline] + f"<!-- manifest: {digest} -->\n" + text[first_newline:]
    atomic_write_text(path, tagged)


def render_tsne_scatter(points: list[tuple[str, str, float, float]],
                        path: Path, digest: str) -> None:
    """2-D embedding scatter, one color per identity."""
    identities = sorted({ident for _, ident, _, _ in points}, key=identity_sort_key)
    fig, ax = plt.subplots(figsize=(7, 5))
    for i, identity in enumerate(identities):
        xs = [x for _, ident, x, _ in points if ident == identity]
        ys = [y for _, ident, _, y in points if ident == identity]
        ax.scatter(xs, ys, s=22, alpha=0.8, label=identity,
                   color=_color_for(identity, i))
    ax.set_xlabel("t-SNE 1")
    ax.set_ylabel("t-SNE 2")
    ax.set_title("Completion embeddings by identity")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save_svg(fig, path, digest)


def render_frequency_bars(top_words: dict[str, list[tuple[str, int]]],
                          path: Path, digest: str) -> None:
    """Ranked horizontal bars per label: the word-cloud substitute."""
    labels = sorted(top_words, key=identity_sort_key)
    fig, axes = plt.subplots(1, len(labels), figsize=(3.2 * len(labels), 4.5),
                             squeeze=False)
    for i, label in enumerate(labels):
        ax = axes[0][i]
        words = top_words[label]
        ys = range(len(words), 0, -1)
        ax.barh(list(ys), [c for _, c in words], color=_color_for(label, i))
        ax.set_yticks(list(ys))
        ax.set_yticklabels([w for w, _ in words], fontsize=7)
        ax.set_title(label, fontsize=9)
        ax.tick_params(axis="x", labelsize=7)
    fig.suptitle("Most frequent completion words per label", fontsize=11)
    fig.tight_layout()
    _save_svg(fig, path, digest)


def render_markdown_summary(
    path: Path,
    digest: str,
    n_bios: int,
    generation_counts: dict[str, int],
    regard_rows: list[tuple[str, float, float, int]],
    similarity_rows: list[tuple[str, float, int]],
    debias_summary: list[tuple[str, float, float, float]],
    debias_counts: tuple[int, int],
) -> None:
    """Human-readable run summary. The debias section is omitted (with a
    note) when no sentences were rewritten."""
    diff_by_identity = {ident: diff for ident, _, diff, _ in regard_rows}
    lines = [
        "# Regard audit summary",
        "",
        f"Run manifest digest: `{digest}`",
        "",
        f"Biographies: {n_bios}. Completions per identity: "
        + ", ".join(f"{ident}={n}" for ident, n in sorted(
            generation_counts.items(), key=lambda kv: identity_sort_key(kv[0]))),
        "",
        "## Group similarity and regard difference vs control",
        "",
        "Regard scalar = p(positive) - p(negative); the difference is the",
        "control mean minus the group mean, so positive values mark groups",
        "portrayed with lower regard. The scalar reduction is a documented",
        "choice of this toolkit, not a property of the classifier.",
        "",
        "| identity | mean cosine vs control | regard diff vs control | n |",
        "|---|---|---|---|",
    ]
    sim_by_identity = {s[0]: s for s in similarity_rows}
    for identity, _, diff, n in regard_rows:
        if identity == "control":
            continue
        sim = sim_by_identity.get(identity)
        sim_text = fmt_float(sim[1]) if sim else "-"
        lines.append(f"| {identity} | {sim_text} | {fmt_float(diff)} | {n} |")
    lines += ["", "## Figures", "",
              "- `tsne.svg`: completion embeddings by identity",
              "- `frequency_bars.svg`: most frequent words per label", ""]

    processed, accepted = debias_counts
    if processed == 0:
        lines += ["## Debiasing", "",
                  "No sentences fell below the rewrite threshold; the debias "
                  "section is omitted.", ""]
    else:
        lines += [
            "## Debiasing",
            "",
            f"Rewrite attempts: {processed} sentences, {accepted} accepted "
            "rewrites across both methods.",
            "",
            "Regard difference vs control by method (lower is better):",
            "",
            "| identity | original | baseline | chain-of-thought |",
            "|---|---|---|---|",
        ]
        for identity, original, baseline, cot in debias_summary:
            lines.append(
                f"| {identity} | {fmt_float(original)} | {fmt_float(baseline)} "
                f"| {fmt_float(cot)} |")
        lines.append("")
    atomic_write_text(path, "\n".join(lines))
