"""Contextual encoders behind a single small interface.

Two implementations:

* ``TinyEncoder`` — a randomly initialized transformer encoder (default
  2 layers, 2 heads, dim 32) over a greedy word-piece vocabulary built from
  the working corpus.  It exercises the same code paths as a large
  pretrained encoder at CPU speed and is fully seed-deterministic.
* ``HFEncoder`` — a thin wrapper around a HuggingFace checkpoint loaded from
  a local directory or registry identifier (import is lazy; only needed for
  full-scale runs).

Word-level tokens are lowercased and split into sub-pieces; the first piece
of each word carries the word's representation, continuation pieces are
masked from token-level losses.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .documents import tokenize

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = (PAD, UNK, CLS, SEP)
CONT = "##"


class SubwordVocab:
    """Greedy longest-match word-piece vocabulary.

    Every single character observed at build time is included (with its
    continuation form), so any word over the observed alphabet tokenizes
    without loss; words containing unseen characters map to [UNK].
    """

    def __init__(self, pieces: list[str]):
        self.pieces = list(pieces)
        self.index = {p: i for i, p in enumerate(self.pieces)}
        if len(self.index) != len(self.pieces):
            raise ValueError("duplicate pieces in vocabulary")
        for special in SPECIALS:
            if special not in self.index:
                raise ValueError(f"vocabulary missing {special}")
        self._max_piece = max((len(p) for p in self.pieces), default=1)

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    # Always-available alphabet: keeps unseen numerics and letter strings on
    # the char-fallback path instead of collapsing to [UNK].
    BASE_CHARS = "abcdefghijklmnopqrstuvwxyz0123456789.,;:%()-+/="
    # Numeric-looking surfaces never become whole-word pieces; they always
    # decompose over digit pieces, so shifted or rescaled values stay on
    # trained embeddings (mirroring a real sub-word vocabulary).
    _NUMERIC_LIKE = re.compile(r"[+-]?[\d.,]+%?")

    @classmethod
    def build(cls, words, min_word_freq: int = 1, max_words: int = 20000) -> "SubwordVocab":
        """Build from an iterable of word tokens (case-insensitive)."""
        freq: dict[str, int] = {}
        chars: set[str] = set(cls.BASE_CHARS)
        for word in words:
            word = word.lower()
            freq[word] = freq.get(word, 0) + 1
            chars.update(word)
        pieces = list(SPECIALS)
        for ch in sorted(chars):
            pieces.append(ch)
            pieces.append(CONT + ch)
        kept = sorted((w for w, n in freq.items()
                       if n >= min_word_freq and len(w) > 1
                       and not cls._NUMERIC_LIKE.fullmatch(w)),
                      key=lambda w: (-freq[w], w))[:max_words]
        for word in kept:
            if word not in pieces:
                pieces.append(word)
        return cls(pieces)

    def encode_word(self, word: str) -> list[int]:
        """Greedy longest-match split; whole word becomes [UNK] on failure."""
        word = word.lower()
        ids = []
        pos = 0
        while pos < len(word):
            end = min(len(word), pos + self._max_piece)
            match = None
            while end > pos:
                piece = word[pos:end]
                if pos > 0:
                    piece = CONT + piece
                if piece in self.index:
                    match = self.index[piece]
                    break
                end -= 1
            if match is None:
                return [self.unk_id]
            ids.append(match)
            pos = end
        return ids or [self.unk_id]

    def to_json(self) -> str:
        return json.dumps({"pieces": self.pieces})

    @classmethod
    def from_json(cls, text: str) -> "SubwordVocab":
        return cls(json.loads(text)["pieces"])


@dataclass
class EncoderConfig:
    dim: int = 32
    n_layers: int = 2
    n_heads: int = 2
    ffn_mult: int = 2
    max_len: int = 128
    seed: int = 0

    def validate(self):
        if self.dim % self.n_heads != 0:
            raise ValueError("dim must be divisible by n_heads")


@dataclass
class WordEncoding:
    """A word sequence mapped to sub-piece ids.

    ``word_positions[i]`` is the sequence index of word i's first piece
    (position 0 is [CLS], the final position is [SEP]).
    """
    ids: list[int]
    word_positions: list[int]


class _Block(nn.Module):
    def __init__(self, dim: int, n_heads: int, ffn_mult: int):
        super().__init__()
        self.attn = nn.MultiheadAttention(dim, n_heads, batch_first=True)
        self.ln1 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, ffn_mult * dim), nn.GELU(),
                                 nn.Linear(ffn_mult * dim, dim))
        self.ln2 = nn.LayerNorm(dim)

    def forward(self, x, key_padding_mask=None):
        attn_out, _ = self.attn(x, x, x, key_padding_mask=key_padding_mask,
                                need_weights=False)
        x = self.ln1(x + attn_out)
        x = self.ln2(x + self.ffn(x))
        return x


class TinyEncoder(nn.Module):
    """Seed-deterministic transformer encoder over a sub-piece vocabulary."""

    def __init__(self, vocab: SubwordVocab, config: EncoderConfig | None = None,
                 mode: str = "trainable"):
        super().__init__()
        config = config or EncoderConfig()
        config.validate()
        self.vocab = vocab
        self.config = config
        with torch.random.fork_rng():
            torch.manual_seed(config.seed)
            self.tok_emb = nn.Embedding(len(vocab), config.dim, padding_idx=vocab.pad_id)
            self.pos_emb = nn.Embedding(config.max_len, config.dim)
            self.blocks = nn.ModuleList(
                _Block(config.dim, config.n_heads, config.ffn_mult)
                for _ in range(config.n_layers))
        self.set_mode(mode)

    @property
    def cls_dim(self) -> int:
        return self.config.dim

    @property
    def mode(self) -> str:
        return self._mode

    def set_mode(self, mode: str):
        if mode not in ("frozen", "trainable"):
            raise ValueError(f"unknown encoder mode {mode!r}")
        self._mode = mode
        for p in self.parameters():
            p.requires_grad_(mode == "trainable")
        if mode == "frozen":
            self.eval()

    def encode_words(self, words, max_words: int | None = None) -> WordEncoding:
        """[CLS] pieces(word_0) .. pieces(word_{n-1}) [SEP]."""
        ids = [self.vocab.cls_id]
        positions = []
        for word in (words if max_words is None else words[:max_words]):
            positions.append(len(ids))
            ids.extend(self.vocab.encode_word(word))
        ids.append(self.vocab.sep_id)
        if len(ids) > self.config.max_len:
            raise ValueError(
                f"sequence of {len(ids)} pieces exceeds encoder limit {self.config.max_len}")
        return WordEncoding(ids=ids, word_positions=positions)

    def forward(self, ids: torch.Tensor, key_padding_mask: torch.Tensor | None = None):
        """ids: [B, T] int64; key_padding_mask: [B, T] bool, True = padding."""
        b, t = ids.shape
        pos = torch.arange(t, device=ids.device).unsqueeze(0).expand(b, t)
        x = self.tok_emb(ids) + self.pos_emb(pos)
        for block in self.blocks:
            x = block(x, key_padding_mask=key_padding_mask)
        return x

    def run_batch(self, encodings: list[WordEncoding]) -> tuple[torch.Tensor, torch.Tensor]:
        """Pad, run, and return (hidden [B,T,D], padding mask [B,T])."""
        dtype = next(self.parameters()).dtype
        device = next(self.parameters()).device
        max_t = max(len(e.ids) for e in encodings)
        ids = torch.full((len(encodings), max_t), self.vocab.pad_id,
                         dtype=torch.long, device=device)
        mask = torch.ones((len(encodings), max_t), dtype=torch.bool, device=device)
        for i, enc in enumerate(encodings):
            ids[i, :len(enc.ids)] = torch.tensor(enc.ids, dtype=torch.long, device=device)
            mask[i, :len(enc.ids)] = False
        hidden = self.forward(ids, key_padding_mask=mask)
        return hidden.to(dtype), mask

    @torch.no_grad()
    def cls_vector(self, text: str) -> np.ndarray:
        """Deterministic sequence-summary vector for one sentence."""
        was_training = self.training
        self.eval()
        words = [span.token for span in tokenize(text)]
        max_words = None
        enc = self.encode_words(words)
        while len(enc.ids) > self.config.max_len:  # pragma: no cover - guarded above
            max_words = (max_words or len(words)) - 1
            enc = self.encode_words(words, max_words=max_words)
        hidden, _ = self.run_batch([enc])
        if was_training and self._mode == "trainable":
            self.train()
        return hidden[0, 0].detach().cpu().numpy().astype(np.float64)

    # -- persistence ------------------------------------------------------

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.state_dict(), directory / "encoder.pt")
        (directory / "vocab.json").write_text(self.vocab.to_json(), encoding="utf-8")
        (directory / "encoder_config.json").write_text(
            json.dumps(self.config.__dict__), encoding="utf-8")

    @classmethod
    def load(cls, directory, mode: str = "frozen") -> "TinyEncoder":
        directory = Path(directory)
        vocab = SubwordVocab.from_json((directory / "vocab.json").read_text(encoding="utf-8"))
        config = EncoderConfig(**json.loads(
            (directory / "encoder_config.json").read_text(encoding="utf-8")))
        encoder = cls(vocab, config, mode="trainable")
        encoder.load_state_dict(torch.load(directory / "encoder.pt", weights_only=True))
        encoder.set_mode(mode)
        return encoder


class HFEncoder:
    """CLS vectors from a pretrained HuggingFace encoder (local dir or
    registry id).  Used for full-scale runs; desk-scale tests use
    TinyEncoder."""

    def __init__(self, model_name_or_path: str, mode: str = "frozen"):
        from transformers import AutoModel, AutoTokenizer  # lazy heavy import

        self.tokenizer = AutoTokenizer.from_pretrained(model_name_or_path)
        self.model = AutoModel.from_pretrained(model_name_or_path)
        self.mode = mode
        if mode == "frozen":
            self.model.eval()
            for p in self.model.parameters():
                p.requires_grad_(False)

    @property
    def cls_dim(self) -> int:
        return self.model.config.hidden_size

    @torch.no_grad()
    def cls_vector(self, text: str) -> np.ndarray:
        batch = self.tokenizer(text, return_tensors="pt", truncation=True)
        out = self.model(**batch)
        return out.last_hidden_state[0, 0].cpu().numpy().astype(np.float64)


def vocab_from_corpus(corpus, min_word_freq: int = 1) -> SubwordVocab:
    from .documents import segment_and_tokenize

    def words():
        for doc in corpus.documents:
            for _, tokens in segment_and_tokenize(doc):
                for span in tokens:
                    yield span.token

    return SubwordVocab.build(words(), min_word_freq=min_word_freq)
