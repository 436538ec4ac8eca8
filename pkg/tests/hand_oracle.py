"""Hand enumeration of single-round probabilities, independent of the simulator.

States are tracked by label only: measuring an eigenstate of one basis in the
same basis is certain, in the other basis it is a fair coin, and U maps each
label to its partner of opposite bit in the same basis. Everything is exact
(`Fraction`).
"""

from fractions import Fraction
from itertools import product

HALF = Fraction(1, 2)
LABELS = ("+z", "-z", "+x", "-x")
BASES = ("z", "x")


def basis(label):
    return label[1]


def bit(label):
    return 0 if label[0] == "+" else 1


def flip(label):
    return ("-" if label[0] == "+" else "+") + label[1]


def outcome_dist(label, b):
    """{bit: probability} measuring `label` in basis `b`."""
    if basis(label) == b:
        return {bit(label): Fraction(1)}
    return {0: HALF, 1: HALF}


def splitter_flag(states, time_resolved):
    """P(>= 2 registered clicks) for photons entering the 50/50 station.

    With time_resolved=False all photons fall inside one dead time, so photons
    landing on the same (arm, bit) detector merge into one click.
    """
    total = Fraction(0)
    for arms in product(BASES, repeat=len(states)):
        p_arms = HALF ** len(states)
        for bits in product((0, 1), repeat=len(states)):
            p = p_arms
            for s, a, b in zip(states, arms, bits):
                p *= outcome_dist(s, a).get(b, 0)
            if p == 0:
                continue
            detectors = list(zip(arms, bits))
            clicks = len(detectors) if time_resolved else len(set(detectors))
            if clicks >= 2:
                total += p
    return total


def intercept_resend_check_error():
    """P(check bit wrong | Alice's single check basis equals Bob's)."""
    err = Fraction(0)
    for prep, eve_b, alice_b in product(LABELS, BASES, BASES):
        if alice_b != basis(prep):
            continue
        w = Fraction(1, 4) * HALF  # prep, Eve's basis; Alice's basis conditioned on match
        for eve_bit, pe in outcome_dist(prep, eve_b).items():
            resent = ("+" if eve_bit == 0 else "-") + eve_b
            for a_bit, pa in outcome_dist(resent, alice_b).items():
                if a_bit != bit(prep):
                    err += w * pe * pa
    return err


def intercept_resend_key_error():
    """P(Bob decodes the wrong op bit) with forward-leg intercept-resend."""
    err = Fraction(0)
    for prep, eve_b, op in product(LABELS, BASES, (0, 1)):
        w = Fraction(1, 4) * HALF * HALF
        for eve_bit, pe in outcome_dist(prep, eve_b).items():
            resent = ("+" if eve_bit == 0 else "-") + eve_b
            back = flip(resent) if op else resent
            for b_bit, pb in outcome_dist(back, basis(prep)).items():
                decoded = int(b_bit != bit(prep))
                if decoded != op:
                    err += w * pe * pb
    return err


def trojan_guess(probe, op):
    """Eve's deterministic guess from her returning probe."""
    back = flip(probe) if op else probe
    (outcome,) = outcome_dist(back, basis(probe)).keys()
    return int(outcome != bit(probe))
