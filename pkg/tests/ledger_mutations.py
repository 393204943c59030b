"""Single-field mutations of ledger transactions for tamper-evidence checks."""

import dataclasses
import random

from ehr_abms.ledger import KINDS, LedgerTransaction

FIELDS = ("seq", "timestamp", "kind", "event_id", "payload_digest", "prev_hash", "this_hash", "payload")


def mutate(tx: LedgerTransaction, field: str, rng: random.Random) -> LedgerTransaction:
    value = getattr(tx, field)
    if field == "seq":
        new = value + rng.choice([-1, 1, 2, 100])
    elif field == "kind":
        new = rng.choice([k for k in KINDS if k != value] + ["forged"])
    elif field == "payload":
        new = dict(value)
        key = rng.choice(sorted(new))
        new[key] = f"{new[key]}x"
    else:
        i = rng.randrange(len(value))
        repl = rng.choice([c for c in "0123456789abcdef" if c != value[i]])
        new = value[:i] + repl + value[i + 1 :]
    assert new != value
    return dataclasses.replace(tx, **{field: new})
