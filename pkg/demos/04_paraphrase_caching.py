"""Paraphrase generation against a local mock endpoint, cold vs warm cache.

A throwaway chat-completion server runs on localhost; the first pass issues
one HTTP request per instance, the second pass is served entirely from the
content-addressed cache.
"""
import json
import os
import re
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from cgsplit import LlmClientConfig, ParaphraseCache, augment_dataset, generate_paraphrases
from cgsplit.corpus import dataset_from_rows

K = 4
requests_served = 0


class Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        global requests_served
        requests_served += 1
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        text = re.search(r"Utterance: (.*)\Z", body["messages"][0]["content"], re.DOTALL).group(1)
        content = json.dumps([f"{text} (rephrased {i})" for i in range(1, K + 1)])
        data = json.dumps({"choices": [{"message": {"content": content}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
threading.Thread(target=server.serve_forever, daemon=True).start()
os.environ.setdefault("LLM_API_KEY", "demo-token")

train = dataset_from_rows(
    "train",
    [
        ("i have a pending top-up", "pending_top_up"),
        ("what currencies can i hold", "fiat_currency_support"),
        ("my card would not go through", "declined_card_payment"),
    ],
)

with tempfile.TemporaryDirectory() as tmp:
    config = LlmClientConfig(
        endpoint=f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions",
        model="demo-model",
        max_in_flight=2,
    )
    cache = ParaphraseCache(tmp)

    sets = generate_paraphrases(train.utterances, K, config, cache)
    print(f"cold pass: {requests_served} HTTP requests for {len(train)} instances")
    for pset in sets[:1]:
        print(f"  {pset.source_id}: {pset.source_text!r}")
        for p in pset.paraphrases:
            print(f"    -> {p!r}")

    generate_paraphrases(train.utterances, K, config, cache)
    print(f"warm pass: {requests_served} total requests (unchanged; cache hit)")

    augmented = augment_dataset(train, sets)
    print(f"augmented training set: {len(train)} -> {len(augmented)} instances")
    print("last derived id:", augmented.utterances[-1].id)

server.shutdown()
