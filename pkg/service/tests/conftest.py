"""Shared fixtures: tiny local checkpoints and a live-server harness.

The real MNLI checkpoint is hundreds of megabytes and needs hub access,
so protocol and mapping behavior is tested against tiny randomly
initialized classifiers built on the fly. Weights are seeded, so two
checkpoints that differ only in their label maps share logits, which is
what the mapping tests rely on.
"""
import socket
import threading
import time

import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.normalizers import Lowercase
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.processors import TemplateProcessing
from transformers import (
    AutoModelForSequenceClassification,
    AutoTokenizer,
    BertConfig,
    BertForSequenceClassification,
    PreTrainedTokenizerFast,
)

from nli_service import ServiceConfig

WORDS = [
    "the", "a", "an", "is", "of", "in", "to", "and", "near", "by",
    "blue", "spice", "pub", "riverside", "area", "located", "restaurant",
    "you", "can", "bring", "your", "kids", "family", "friendly",
    "dog", "cat", "bird", "park", "house", "running", "sleeping", "green",
    "small", "brown", "through", "food", "price", "rating", "customer",
    ".", ",",
]

MNLI_ID2LABEL = {0: "CONTRADICTION", 1: "NEUTRAL", 2: "ENTAILMENT"}
PERMUTED_ID2LABEL = {0: "Entailment", 1: "Contradiction", 2: "Neutral"}

FIGURE_PREMISE = "Blue Spice is a pub. Blue Spice is located in the riverside."
FIGURE_HYPOTHESIS = "You can bring your kids to Blue Spice in the riverside area."


def build_checkpoint(directory, id2label=None, seed=0):
    """Write a tiny tokenizer + classifier checkpoint and return its path.

    Same seed means same weights regardless of id2label, so label-map
    variants of one checkpoint are logit-identical.
    """
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3}
    for word in WORDS:
        vocab[word] = len(vocab)
    tokenizer = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tokenizer.normalizer = Lowercase()
    tokenizer.pre_tokenizer = Whitespace()
    tokenizer.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        model_max_length=512,
    )

    kwargs = {}
    if id2label is not None:
        kwargs["id2label"] = id2label
        kwargs["label2id"] = {label: index for index, label in id2label.items()}
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=37,
        max_position_embeddings=512,
        num_labels=3,
        **kwargs,
    )
    torch.manual_seed(seed)
    model = BertForSequenceClassification(config)
    model.eval()
    model.save_pretrained(directory)
    fast.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    return build_checkpoint(tmp_path_factory.mktemp("ckpt-mnli"), MNLI_ID2LABEL)


@pytest.fixture(scope="session")
def permuted_checkpoint(tmp_path_factory):
    return build_checkpoint(tmp_path_factory.mktemp("ckpt-permuted"), PERMUTED_ID2LABEL)


@pytest.fixture(scope="session")
def unnamed_labels_checkpoint(tmp_path_factory):
    # Default transformers labels (LABEL_0..LABEL_2): loading must refuse.
    return build_checkpoint(tmp_path_factory.mktemp("ckpt-unnamed"), None)


def service_config(checkpoint, **overrides):
    overrides.setdefault("sanity_check", False)
    return ServiceConfig(model_id=checkpoint, device="cpu", **overrides)


SANITY_PROBE = ("the dog is running", "a dog is running")


def find_checkpoint_by_argmax(tmp_path_factory, want_entailment):
    """Scan seeds for a tiny checkpoint whose probe-pair argmax matches.

    Random tiny classifiers are bias-dominated, so the argmax is a
    property of the seed; a handful of seeds covers all three labels.
    """
    from nli_service import NliModel

    for seed in range(30):
        kind = "ent" if want_entailment else "non"
        path = build_checkpoint(
            tmp_path_factory.mktemp(f"ckpt-{kind}{seed}"), MNLI_ID2LABEL, seed=seed
        )
        model = NliModel(service_config(path))
        result = model.classify([SANITY_PROBE])[0]
        values = {k: result[k] for k in ("contradiction", "neutral", "entailment")}
        if (max(values, key=values.get) == "entailment") == want_entailment:
            return path
    return None


@pytest.fixture(scope="session")
def pinned_figure_distribution(tiny_checkpoint):
    """Expected distribution for the worked-example pair, via a raw
    forward pass independent of the service code path."""
    tokenizer = AutoTokenizer.from_pretrained(tiny_checkpoint)
    model = AutoModelForSequenceClassification.from_pretrained(tiny_checkpoint)
    model.eval()
    encoding = tokenizer(FIGURE_PREMISE, FIGURE_HYPOTHESIS, return_tensors="pt")
    with torch.no_grad():
        logits = model(**encoding).logits
    probabilities = torch.softmax(logits.float(), dim=-1)[0].tolist()
    # Index meaning fixed by MNLI_ID2LABEL above.
    return {
        "contradiction": probabilities[0],
        "neutral": probabilities[1],
        "entailment": probabilities[2],
    }


class LiveServer:
    """uvicorn on an OS-assigned port in a background thread."""

    def __init__(self, app):
        import uvicorn

        self._sock = socket.socket()
        self._sock.bind(("127.0.0.1", 0))
        port = self._sock.getsockname()[1]
        self.url = f"http://127.0.0.1:{port}"
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
        )
        self._thread = threading.Thread(
            target=self._server.run, kwargs={"sockets": [self._sock]}, daemon=True
        )

    def __enter__(self):
        self._thread.start()
        deadline = time.monotonic() + 15
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 15 s")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc_info):
        self._server.should_exit = True
        self._thread.join(timeout=15)
        self._sock.close()
