import json

import numpy as np
import pytest
import scipy.sparse as sp

from tarsim.corpus import load_corpus, load_labels
from tarsim.features import SparseMatrix


def write_corpus(path, docs):
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, text in docs:
            fh.write(json.dumps({"doc_id": doc_id, "text": text}) + "\n")


def write_qrels(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for category, doc_id, rel in rows:
            fh.write(f"{category} {doc_id} {rel}\n")


def make_collection(tmp_path, docs, rows):
    corpus_path = tmp_path / "corpus.jsonl"
    labels_path = tmp_path / "labels.qrels"
    write_corpus(corpus_path, docs)
    write_qrels(labels_path, rows)
    return load_labels(labels_path, load_corpus(corpus_path))


def dense_to_matrix(dense, family="bm25"):
    """Synthetic feature matrix from a dense array (rows = documents)."""
    csr = sp.csr_matrix(np.asarray(dense, dtype=np.float32))
    csr.sort_indices()
    return SparseMatrix(csr=csr, family=family)


@pytest.fixture
def toy_collection(tmp_path):
    docs = [
        ("d0", "iron and steel"),
        ("d1", "steel plants and furnaces"),
        ("d2", "cocoa harvest news"),
        ("d3", "iron ore shipments"),
        ("d4", "football match report"),
        ("d5", ""),
    ]
    rows = [
        ("metals", "d0", 1),
        ("metals", "d1", 1),
        ("metals", "d2", 0),
        ("metals", "d3", 1),
        ("metals", "d4", 0),
        ("metals", "d5", 0),
    ]
    return make_collection(tmp_path, docs, rows)
