"""Audit toolkit for representational bias in LLM completions.

Pipeline stages: neutralize biographies, build identity-trigger prompts,
collect completions (live / record / replay), analyze them (frequencies,
PMI, TF-IDF cosine, t-SNE, regard differences), attribute low regard to
tokens via Shapley values, and rewrite low-regard sentences with a
chain-of-thought prompting loop.
"""

__version__ = "0.1.0"
