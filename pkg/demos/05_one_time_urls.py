"""
One-time download links from the edge store
===========================================

Ciphertext lives off the ledger, addressed by its hash. Each successful
access request yields a link that works once; afterwards, and for links
that never existed or have expired, the store answers "gone".
"""

import tempfile
import threading
import urllib.error
import urllib.request
from datetime import timedelta
from pathlib import Path

from ehr_abms.edge_http import serve_in_background
from ehr_abms.scenario import ANNIE_GID, RESEARCH_GID, run_scenario_annie
from ehr_abms.workspace import Workspace

ws = Workspace.create(Path(tempfile.mkdtemp()) / "ws")
run_scenario_annie(ws, ehr_size=64 * 1024)
oid = ws.ledger.profiles[ANNIE_GID].ehr_refs[0].object_id
print("object", oid[:16], "...")

# The store keeps only a digest of each token.
out = ws.request_access(RESEARCH_GID, ANNIE_GID)
print("url:", out.url)
print("first fetch :", len(ws.fetch(out.url) or b""), "bytes")
print("second fetch:", ws.fetch(out.url))

# Many clients racing for one link: exactly one of them wins.
_, url = ws.edge.issue_token(oid)
barrier = threading.Barrier(64)
wins = []


def racer():
    barrier.wait()
    if ws.edge.redeem_url(url) is not None:
        wins.append(1)


threads = [threading.Thread(target=racer) for _ in range(64)]
for t in threads:
    t.start()
for t in threads:
    t.join()
print("64 racers, winners:", len(wins))

# The same semantics over a local HTTP facade.
server, base = serve_in_background(ws.edge)
tok, _ = ws.edge.issue_token(oid, ttl=timedelta(minutes=5))
print("GET once ->", urllib.request.urlopen(f"{base}/once/{tok.token}").status)
try:
    urllib.request.urlopen(f"{base}/once/{tok.token}")
except urllib.error.HTTPError as exc:
    print("GET twice ->", exc.code, exc.read())
server.shutdown()
server.server_close()
ws.close()
