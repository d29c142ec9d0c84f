"""
Synthetic inheritance-style items for desk-scale runs.

Each question names a small set of "planted" heir tokens drawn from a fixed
pool; the correct option repeats exactly those tokens, while every
distractor uses other pool tokens. A relevance model that learns to match
question and answer content can therefore reach near-perfect accuracy,
which makes the dataset a learnability check for the whole pipeline.
"""

from src.data.dataset import LEVELS, OPTION_LETTERS, McqItem, validate_item
from src.utils.logger import setup_logger
from src.utils.seeding import named_rng

logger = setup_logger("Synthetic")

HEIR_POOL = tuple(
    f"{relation}{n}"
    for relation in ("son", "daughter", "wife", "husband", "mother", "father", "brother", "sister")
    for n in range(1, 7)
)
QUESTION_LEAD = "who inherits"
DEFAULT_PLANTED = 2


def synthesize_toy_dataset(n_items: int, seed: int, n_planted: int = DEFAULT_PLANTED) -> list[McqItem]:
    """
    Generates ``n_items`` six-option items with levels assigned round-robin
    (Beginner, Intermediate, Advanced, Beginner, ...).

    The label position and every token draw come from the "synth" stream of
    ``seed``; distractors never share a token with the question and never
    repeat one another.
    """
    if n_items < 1:
        raise ValueError(f"n_items must be >= 1, got {n_items}")
    if n_planted < 1 or n_planted * len(OPTION_LETTERS) > len(HEIR_POOL):
        raise ValueError(f"n_planted={n_planted} does not fit a pool of {len(HEIR_POOL)} tokens")

    rng = named_rng(seed, "synth")
    items = []
    for index in range(n_items):
        # six disjoint token groups: the first is planted, the rest are distractors
        picks = rng.permutation(len(HEIR_POOL))[: n_planted * len(OPTION_LETTERS)]
        groups = [
            " ".join(HEIR_POOL[int(p)] for p in picks[g * n_planted:(g + 1) * n_planted])
            for g in range(len(OPTION_LETTERS))
        ]
        label_pos = int(rng.integers(0, len(OPTION_LETTERS)))
        texts = groups[1:]
        texts.insert(label_pos, groups[0])

        item = McqItem(
            id=f"synth-{seed}-{index:05d}",
            question=f"{QUESTION_LEAD} {groups[0]}",
            options=dict(zip(OPTION_LETTERS, texts)),
            label=OPTION_LETTERS[label_pos],
            level=LEVELS[index % len(LEVELS)],
        )
        items.append(validate_item(item))

    logger.info(f"[SYNTH] {n_items} items (seed={seed}, planted={n_planted})")
    return items
