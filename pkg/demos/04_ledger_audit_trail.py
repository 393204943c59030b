"""
A hash-chained ledger of who did what
=====================================

Every registration, profile write and access request becomes one
transaction whose hash covers the previous one. Public payloads carry only
digests; names and identifiers stay in a private record store.
"""

import dataclasses
import tempfile
from pathlib import Path

from ehr_abms.ledger import read_log, verify_chain
from ehr_abms.scenario import ANNIE_GID, LAB_GID, run_scenario_annie
from ehr_abms.workspace import Workspace

tmp = Path(tempfile.mkdtemp())
ws = Workspace.create(tmp / "ws")
run_scenario_annie(ws, ehr_size=4096)

for tx in ws.ledger.transactions:
    print(f"{tx.seq:>3} {tx.kind:<16} {tx.this_hash[:16]}  prev {tx.prev_hash[:16]}")

# A request is logged whether or not it succeeds.
out = ws.request_access(LAB_GID, ANNIE_GID)
last = ws.ledger.transactions[-1]
print(last.kind, last.payload["outcome"], "valid_count", last.payload["valid_count"])

# The log on disk never contains the patient's name or identifiers.
log_bytes = (ws.root / "ledger" / "ledger.log").read_bytes()
print("name in log:", b"Annie" in log_bytes, "| patient id in log:", b"0003231" in log_bytes)

# Edit one historical transaction and the chain breaks at that point.
txs = read_log(ws.root / "ledger" / "ledger.log")
txs[7] = dataclasses.replace(txs[7], timestamp="2001-01-01T00:00:00.000000Z")
print("after editing seq 7:", verify_chain(txs))
print("untouched log:", ws.ledger.verify_chain())
ws.close()
