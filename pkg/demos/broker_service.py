"""Run the broker over HTTP: register providers, submit a request, read back the SLA."""

import json
import tempfile
import urllib.request

from saasbroker import datasets
from saasbroker.broker import BrokerConfig, BrokerService, serve_in_thread
from saasbroker.sla import to_xml


def call(base, method, path, body=None, ctype="application/json"):
    data = None if body is None else (body if isinstance(body, bytes) else json.dumps(body).encode())
    req = urllib.request.Request(base + path, data=data, method=method, headers={"Content-Type": ctype})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


data_dir = tempfile.mkdtemp(prefix="saasbroker-")
server, base = serve_in_thread(BrokerService(data_dir, BrokerConfig()))
print("listening on", base, "data in", data_dir)

for o in datasets.case_study_offers():
    call(base, "POST", "/providers", {"provider_id": o.provider_id, "offer": dict(o.values)})

session = call(base, "POST", "/requests?consumer_id=COMPANY", to_xml(datasets.case_study_request()),
               "application/xml")
print("selected", session["selected_provider"], "outcome", session["outcome"], "state", session["state"])
for e in session["ranking"]["entries"][:3]:
    print(f"  rank {e['rank']} provider {e['provider_id']} {e['score']:.2f}%")

if session["sla_id"]:
    sla = call(base, "GET", f"/slas/{session['sla_id']}")
    for slo in sla["slos"]:
        print(f"  {slo['indicator']} {slo['comparator']} {slo['target']:.5g}")
server.shutdown()
server.server_close()

# a fresh service over the same directory sees the same session
server, base = serve_in_thread(BrokerService(data_dir, BrokerConfig()))
print("after restart identical:", call(base, "GET", f"/sessions/{session['session_id']}") == session)
server.shutdown()
server.server_close()
