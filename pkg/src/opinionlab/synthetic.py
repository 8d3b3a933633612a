"""Planted-model corpus generator for end-to-end experiments.

The generator samples a latent opinion state per tweet (stance, morality,
foundation, entity role/polarity, reason) from peaked conditional tables and
then renders text whose cues are deliberately lopsided: stance, role, and
polarity cues are clean, while each foundation shares part of its cue
vocabulary with a fixed partner. A text-only foundation classifier therefore
hits a ceiling, and the cross-task rules are what lift it, which is exactly
the regime the trainer is supposed to exploit.

Everything is drawn from a single seeded generator: same seed, same corpus,
byte for byte.
"""

from __future__ import annotations

import numpy as np

from .corpus import EntityMention, Tweet, extract_hashtags
from .training import AnnotatedCorpus, DistantCorpora

STANCE_PRIOR = (("Anti", 0.4), ("Pro", 0.4), ("Neutral", 0.2))
MORAL_RATE = {"Anti": 0.85, "Pro": 0.80, "Neutral": 0.30}

# kept close to flat so no single foundation dominates a stance; a skewed
# table lets a majority-class scorer look better than it is
FOUNDATION_GIVEN_STANCE = {
    "Anti": (("Liberty/Oppression", 0.32), ("Purity/Degradation", 0.26),
             ("Authority/Subversion", 0.24), ("Care/Harm", 0.18)),
    "Pro": (("Care/Harm", 0.38), ("Fairness/Cheating", 0.33),
            ("Loyalty/Betrayal", 0.29)),
    "Neutral": (("Care/Harm", 0.25), ("Fairness/Cheating", 0.15),
                ("Loyalty/Betrayal", 0.15), ("Authority/Subversion", 0.15),
                ("Purity/Degradation", 0.15), ("Liberty/Oppression", 0.15)),
}

FOUNDATION_CUES = {
    "Care/Harm": ("protect", "harm", "suffering", "vulnerable", "safety"),
    "Fairness/Cheating": ("fair", "equal access", "cheating", "justice", "honest"),
    "Loyalty/Betrayal": ("community", "together", "betrayed", "solidarity", "our people"),
    "Authority/Subversion": ("authority", "obey", "defy", "institutions", "orders"),
    "Purity/Degradation": ("pure", "toxic", "contaminated", "unnatural", "clean body"),
    "Liberty/Oppression": ("freedom", "mandate", "coerced", "my rights", "tyranny"),
}

# each foundation leaks cue words from one partner, and only role/polarity,
# stance, or the reason can break the tie
CONFUSION_PARTNER = {
    "Liberty/Oppression": "Care/Harm", "Care/Harm": "Liberty/Oppression",
    "Authority/Subversion": "Purity/Degradation",
    "Purity/Degradation": "Authority/Subversion",
    "Fairness/Cheating": "Loyalty/Betrayal", "Loyalty/Betrayal": "Fairness/Cheating",
}

# confusion partners differ in their signature role, so the mention role is
# what breaks the cue-word tie
SIGNATURE_ROLE = {
    "Liberty/Oppression": "Actor", "Care/Harm": "Target",
    "Authority/Subversion": "Actor", "Purity/Degradation": "Target",
    "Fairness/Cheating": "Actor", "Loyalty/Betrayal": "Target",
}
SIGNATURE_RATE = 0.75
# polarity is a property of (entity, stance), never of a single mention:
# same-stance tweets about the same entity must agree on it, which is the
# consistency the pairwise constraint enforces at inference time
POSITIVE_RATE = {"Pro": 0.7, "Anti": 0.3, "Neutral": 0.5}

ROLE_CUES = {
    "Actor": ("keeps pushing", "is running this", "decided for everyone"),
    "Target": ("bears the cost", "is on the receiving end", "gets affected most"),
}
POLARITY_CUES = {
    "Positive": ("doing real good", "deserves credit", "helping out"),
    "Negative": ("causing damage", "making it worse", "letting us down"),
}

STANCE_CUES = {
    "Anti": ("never taking this shot", "they cannot make me",
             "stop the rollout", "do your own research"),
    "Pro": ("booked my second dose", "grateful for the jab",
            "everyone should get theirs", "science works"),
    "Neutral": ("clinic hours updated", "county posted new numbers",
                "appointment slots open", "dashboard refreshed today"),
}
STANCE_HASHTAGS = {
    "Anti": ("NoVaccineForMe", "stopmandatoryvaccination", "NoForcedVaccines",
             "vaccinationchoice"),
    "Pro": ("GetVaccinated", "VaccinesSaveLives", "ThisIsOurShot", "TeamVaccine"),
}
HASHTAG_RATE = 0.35

NEUTRAL_FILLER = ("schedule", "report", "thread", "update", "local news",
                  "this week", "posted", "details inside")

# reason id per (stance, foundation); drawn from the shipped catalogs so the
# corpus plugs into the reason workbench unchanged. Reasons are annotations
# attached to a tweet, not text: the only way a classifier can exploit them
# is through the rules that consult the assignment facts.
REASON_OF = {
    ("Anti", "Liberty/Oppression"): "VaxOppression",
    ("Anti", "Care/Harm"): "VaxDanger",
    ("Anti", "Authority/Subversion"): "GovDistrust",
    ("Anti", "Purity/Degradation"): "CovidFake",
    ("Anti", "Fairness/Cheating"): "BigPharmaAnti",
    ("Anti", "Loyalty/Betrayal"): "NatImmunityPro",
    ("Pro", "Liberty/Oppression"): "VaxNotOppression",
    ("Pro", "Care/Harm"): "VaxSafe",
    ("Pro", "Authority/Subversion"): "GovTrust",
    ("Pro", "Purity/Degradation"): "VaxTested",
    ("Pro", "Fairness/Cheating"): "BigPharmaPro",
    ("Pro", "Loyalty/Betrayal"): "CovidReal",
}
REASON_COVERAGE = 0.75
REASON_NOISE = 0.05

ENTITY_SURFACES = ("the government", "the CDC", "big pharma", "our nurses",
                   "my family", "the school board", "local doctors",
                   "the governor", "factory workers", "elderly neighbors")
MENTION_RATE = 0.75
ENTITY_REUSE_CAP = 4


def _pick(rng, table):
    names = [n for n, _ in table]
    probs = np.array([p for _, p in table])
    return names[int(rng.choice(len(names), p=probs / probs.sum()))]


def _choice(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _foundation_cue_words(rng, foundation: str, confusion: float) -> list[str]:
    words = []
    for _ in range(int(rng.integers(2, 4))):
        source = foundation
        if rng.random() < confusion:
            source = CONFUSION_PARTNER[foundation]
        words.append(_choice(rng, FOUNDATION_CUES[source]))
    return words


def make_synthetic(n_tweets: int = 500, seed: int = 7, *,
                   confusion: float = 0.45,
                   reason_coverage: float = REASON_COVERAGE,
                   hashtag_rate: float = HASHTAG_RATE) -> AnnotatedCorpus:
    """Sample a fully annotated corpus from the planted model."""
    rng = np.random.default_rng(seed)
    entity_uses = {s: 0 for s in ENTITY_SURFACES}
    polarity_of: dict = {}  # (entity, stance) -> polarity
    tweets: list[Tweet] = []
    gold: dict = {}
    reason_assignments: dict = {}

    for i in range(n_tweets):
        tid = f"t{i:04d}"
        stance = _pick(rng, STANCE_PRIOR)
        moral = bool(rng.random() < MORAL_RATE[stance])
        foundation = (_pick(rng, FOUNDATION_GIVEN_STANCE[stance])
                      if moral else "None")

        parts = [_choice(rng, STANCE_CUES[stance])]
        if moral:
            parts.extend(_foundation_cue_words(rng, foundation, confusion))
        else:
            parts.extend(_choice(rng, NEUTRAL_FILLER)
                         for _ in range(int(rng.integers(2, 4))))
        parts.append(_choice(rng, NEUTRAL_FILLER))

        mentions = []
        if rng.random() < MENTION_RATE:
            open_entities = [s for s in ENTITY_SURFACES
                             if entity_uses[s] < ENTITY_REUSE_CAP]
            if not open_entities:
                entity_uses = {s: 0 for s in ENTITY_SURFACES}
                open_entities = list(ENTITY_SURFACES)
            surface = _choice(rng, open_entities)
            entity_uses[surface] += 1
            pol_key = (surface, stance)
            if pol_key not in polarity_of:
                polarity_of[pol_key] = ("Positive"
                                        if rng.random() < POSITIVE_RATE[stance]
                                        else "Negative")
            polarity = polarity_of[pol_key]
            if moral and rng.random() < SIGNATURE_RATE:
                role = SIGNATURE_ROLE[foundation]
            else:
                role = _choice(rng, ("Actor", "Target"))
            clause_prefix = " ".join(parts) + " "
            start = len(clause_prefix)
            text_tail = (f" {_choice(rng, ROLE_CUES[role])} and "
                         f"{_choice(rng, POLARITY_CUES[polarity])}")
            mid = f"m{i:04d}"
            mentions.append((mid, start, start + len(surface), surface, role, polarity))
            parts = [clause_prefix + surface + text_tail]

        if stance != "Neutral" and rng.random() < hashtag_rate:
            parts.append(f"#{_choice(rng, STANCE_HASHTAGS[stance])}")

        reason = None
        if moral and stance != "Neutral" and rng.random() < reason_coverage:
            reason = REASON_OF[(stance, foundation)]
            if rng.random() < REASON_NOISE:
                reason = _choice(rng, sorted(set(REASON_OF.values())))

        text = " ".join(parts)
        ms = tuple(EntityMention(mid, tid, s, e, surface, canonical=surface)
                   for mid, s, e, surface, _r, _p in mentions)
        tweets.append(Tweet(tid, text, extract_hashtags(text), ms))

        gold[("IsMoral", (tid,))] = moral
        gold[("HasMF", (tid,))] = foundation
        gold[("VaxStance", (tid,))] = stance
        for mid, _s, _e, _surface, role, polarity in mentions:
            gold[("HasRole", (mid,))] = role
            gold[("EntPolarity", (mid,))] = polarity
        if reason is not None:
            reason_assignments[tid] = reason

    return AnnotatedCorpus(tuple(tweets), gold, reason_assignments)


def split_corpus(corpus: AnnotatedCorpus, eval_fraction: float = 0.25,
                 seed: int = 0):
    """Deterministic train/eval split by tweet id."""
    ids = sorted(t.id for t in corpus.tweets)
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_eval = max(1, int(round(eval_fraction * len(ids))))
    eval_ids, train_ids = order[:n_eval], order[n_eval:]
    return corpus.subset(train_ids), corpus.subset(eval_ids)


# ---------------------------------------------------------------------------
# distant corpora: same cue vocabulary, different phrasing, noisy labels

_DISTANT_FILLER = ("forwarded post", "saw this earlier", "long thread",
                   "copied from a group", "screenshot attached")


def _noisy(rng, label: str, space, noise: float) -> str:
    if rng.random() < noise:
        return _choice(rng, tuple(space))
    return label


def make_distant(seed: int = 11, *, noise: float = 0.45,
                 per_task: int = 150) -> DistantCorpora:
    """Weak out-of-domain training sets mirroring the planted cue vocabulary.

    Labels carry ``noise`` probability of being resampled uniformly, so the
    distant classifiers are useful but visibly worse than ones trained on
    inferred in-domain labels.
    """
    rng = np.random.default_rng(seed)
    foundations = sorted(FOUNDATION_CUES)
    morality, foundation_rows, stance_rows, role_rows, polarity_rows = [], [], [], [], []

    for _ in range(per_task):
        moral = bool(rng.random() < 0.6)
        if moral:
            f = _choice(rng, foundations)
            text = (f"{_choice(rng, FOUNDATION_CUES[f])} "
                    f"{_choice(rng, FOUNDATION_CUES[f])} {_choice(rng, _DISTANT_FILLER)}")
            foundation_rows.append((text, _noisy(rng, f, foundations + ["None"], noise)))
        else:
            text = (f"{_choice(rng, NEUTRAL_FILLER)} {_choice(rng, NEUTRAL_FILLER)} "
                    f"{_choice(rng, _DISTANT_FILLER)}")
            foundation_rows.append((text, _noisy(rng, "None", foundations + ["None"], noise)))
        truth = "True" if moral else "False"
        morality.append((text, _noisy(rng, truth, ("True", "False"), noise)))

    for _ in range(per_task):
        stance = _pick(rng, STANCE_PRIOR)
        text = f"{_choice(rng, STANCE_CUES[stance])} {_choice(rng, _DISTANT_FILLER)}"
        stance_rows.append((text, _noisy(rng, stance, ("Pro", "Anti", "Neutral"), noise)))

    for _ in range(per_task):
        role = _choice(rng, ("Actor", "Target"))
        polarity = _choice(rng, ("Positive", "Negative"))
        surface = _choice(rng, ENTITY_SURFACES)
        text = (f"{surface} {_choice(rng, ROLE_CUES[role])} and "
                f"{_choice(rng, POLARITY_CUES[polarity])}")
        role_rows.append((text, surface, _noisy(rng, role, ("Actor", "Target"), noise)))
        polarity_rows.append((text, surface,
                              _noisy(rng, polarity, ("Positive", "Negative"), noise)))

    return DistantCorpora(tuple(morality), tuple(foundation_rows),
                          tuple(stance_rows), tuple(role_rows), tuple(polarity_rows))
