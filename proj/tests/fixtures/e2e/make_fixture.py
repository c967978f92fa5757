"""Writes the 20-query mock corpus used by the end-to-end tests.

Run from this directory:
    python3 make_fixture.py
"""

import json
import random
import re

LANGUAGES = ["en", "de", "fr", "zh", "ja"]
TOPICS = [
    "Aldermoor", "Brisvale", "Corranth", "Dunmeric", "Elsworth", "Fenhollow", "Galdrith", "Harrowgate",
    "Ilvermark", "Jorvenne", "Kestrelby", "Lunmoor", "Marrowind", "Nettlecombe", "Orlendale", "Pellmire",
    "Quennbury", "Rosswick", "Starnholm", "Tavistock",
]
FILLER = {
    "en": "the city lies near a river and has an old market square with stone houses".split(),
    "de": "die stadt liegt an einem fluss und hat einen alten marktplatz mit steinhäusern".split(),
    "fr": "la ville se trouve près d'une rivière avec une vieille place du marché".split(),
}
CJK_FILLER = {
    "zh": "这座城市位于河边拥有古老的集市广场和石头房屋历史悠久风景优美",
    "ja": "この町は川の近くにあり古い市場広場と石造りの家があります歴史が長い",
}
ANSWER_SENTENCE = {
    "en": "It was founded in {year}.",
    "de": "Sie wurde {year} gegründet.",
    "fr": "Elle a été fondée en {year}.",
    "zh": "它建于{year}年。",
    "ja": "{year}年に設立された。",
}


def word_body(rng, lang, n_words, answer):
    words = [rng.choice(FILLER[lang]) for _ in range(n_words)]
    if answer:
        pos = rng.randrange(0, min(n_words, 90))
        words.insert(pos, answer)
    return " ".join(words)


def cjk_body(rng, lang, n_chars, answer):
    text = "".join(rng.choice(CJK_FILLER[lang]) for _ in range(n_chars))
    if answer:
        pos = rng.randrange(0, min(n_chars, 60))
        text = text[:pos] + answer + text[pos:]
    return text


def chunk(doc, char_languages=("ja", "th", "zh"), units=100):
    body = doc["body"].strip()
    pieces = []
    if doc["language"] in char_languages:
        for i in range(0, len(body), units):
            pieces.append(body[i:i + units])
    else:
        spans = [m.span() for m in re.finditer(r"\S+", body)]
        for i in range(0, len(spans), units):
            group = spans[i:i + units]
            pieces.append(body[group[0][0]:group[-1][1]])
    return [{"chunk_id": f"{doc['doc_id']}#{i}", "doc_id": doc["doc_id"], "title": doc["title"], "text": text,
             "language": doc["language"], "index": i} for i, text in enumerate(pieces)]


def main():
    rng = random.Random(20240611)
    docs, queries, answers = [], [], {}
    for qi, topic in enumerate(TOPICS):
        year = str(1100 + rng.randrange(0, 900))
        qlang = LANGUAGES[qi % len(LANGUAGES)]
        # the answer lives in one or two languages, not always the query's
        holders = set(rng.sample(LANGUAGES, rng.choice([1, 2, 2, 3])))
        qid = f"q{qi:02d}"
        for lang in LANGUAGES:
            for d in range(2):
                doc_id = f"{topic.lower()}-{lang}-{d}"
                has = lang in holders
                sentence = ANSWER_SENTENCE[lang].format(year=year) if has else ""
                if lang in CJK_FILLER:
                    body = cjk_body(rng, lang, rng.randrange(80, 170), sentence)
                else:
                    body = word_body(rng, lang, rng.randrange(60, 160), sentence)
                docs.append({"doc_id": doc_id, "title": f"{topic} {lang}", "body": body, "language": lang})
        queries.append({"query_id": qid, "text": f"{topic} founded year", "language": qlang,
                        "reference_answers": [year]})
        answers[f"{topic} founded year"] = year

    with open("documents.jsonl", "w", encoding="utf-8") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False, sort_keys=True) + "\n")
    with open("queries.jsonl", "w", encoding="utf-8") as f:
        for q in queries:
            f.write(json.dumps(q, ensure_ascii=False, sort_keys=True) + "\n")
    chunks = [c for d in docs for c in chunk(d)]
    with open("chunks.jsonl", "w", encoding="utf-8") as f:
        for c in chunks:
            f.write(json.dumps(c, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n")
    # a chunk is relevant when it states the answer year
    with open("judgments.jsonl", "w", encoding="utf-8") as f:
        for q in queries:
            year = q["reference_answers"][0]
            ids = [c["chunk_id"] for c in chunks if year in c["text"]]
            f.write(json.dumps({"query_id": q["query_id"], "relevant_chunk_ids": ids}, sort_keys=True) + "\n")
    mock = {
        "chunks": "chunks.jsonl",
        "reranker": {"seed": 17, "language_bias": {"en": 0.35}},
        "generators": {
            "grounded": {"mode": "grounded", "answers": answers, "fallback": "unknown"},
            "grounded-terse": {"mode": "grounded", "answers": answers, "fallback": ""},
        },
    }
    with open("mock.json", "w", encoding="utf-8") as f:
        json.dump(mock, f, indent=1, ensure_ascii=False, sort_keys=True)
        f.write("\n")
    config = {
        "language_set": LANGUAGES,
        "endpoints": {
            "retriever": {"url": "${MRAG_MOCK_URL}", "timeout_s": 10, "retries": 3, "max_in_flight": 8},
            "reranker": {"url": "${MRAG_MOCK_URL}", "timeout_s": 10, "retries": 3, "max_in_flight": 8},
            "generators": {
                "grounded": {"url": "${MRAG_MOCK_URL}", "timeout_s": 10, "max_in_flight": 8},
                "grounded-terse": {"url": "${MRAG_MOCK_URL}", "timeout_s": 10, "max_in_flight": 8},
            },
        },
        "retrieval_top_k": 50,
        "laura_retrieval_top_k": 100,
        "rerank_top_k": 5,
        "theta": 0.8,
        "k_negatives": 3,
        "seed": 1234,
    }
    with open("config.json", "w", encoding="utf-8") as f:
        json.dump(config, f, indent=1, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
