"""Seeded synthetic corpus generator for desk-scale runs and tests.

Documents mimic the shape of penetrance papers: an abstract (excluded from
sentence extraction), introduction/methods/results sections, 2-3 planted
ascertainment sentences per document (2.6 on average),
and results sentences that report odds ratios per gene in a compact
"GENE (OR, 6.20)" clause style.  A clause may carry a confidence interval,
in which case the pair (gene, CI lower bound) is planted as an explicit
negative-polarity relation; clauses may also report no estimate ("OR, NR"),
teaching the tagger that non-numeric tokens in estimate position are not
entities.

Generation is a pure function of the spec: the same spec yields
byte-identical documents, records and gold annotations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .documents import Corpus, Document, Section, segment_and_tokenize
from .extract import EntitySpan, ERExample, RelationPair
from .riskdb import RiskRecord

GENES = (
    "BRCA1", "BRCA2", "TP53", "CHEK2", "ATM", "MLH1", "MSH2", "MSH6", "PMS2",
    "CDKN2A", "PALB2", "PTEN", "STK11", "CDH1", "RAD51C", "RAD51D", "BARD1",
    "NBN", "NF1", "BRIP1", "MUTYH", "APC", "EPCAM", "CDK4", "MRE11A",
)
CANCERS = ("Breast", "Ovarian", "Pancreatic", "Colorectal", "Prostate",
           "Melanoma", "Gastric", "Endometrial")
RACES = ("White", "Asian", "Multiple", "Black")
REGIONS = ("Danish", "Swedish", "Dutch", "Korean", "Ontario", "Bavarian",
           "Catalan", "Utah")

RISK_LEADINS = ("These included", "We observed", "Analyses identified")

ASCERTAINMENT_TEMPLATES = (
    "Cases were recruited from the {region} cancer registry between {y0} and {y1}.",
    "A total of {n} carriers and {m} controls were enrolled in the study.",
    "Patients with {cancer} cancer diagnosed before age {age} were eligible for inclusion.",
    "Controls were matched on sex and year of birth from the national registration system.",
    "Probands with a family history of {cancer} cancer were ascertained through clinic referral.",
    "Exclusion criteria comprised prior malignancy and unknown mutation status.",
)

FILLERS = (
    "The association was consistent across subgroups.",
    "Statistical analyses were performed with standard software.",
    "Sequencing was carried out on peripheral blood samples.",
    "The median follow-up was {k} years.",
    "Limitations include the retrospective design and incomplete pedigrees.",
    "Funding sources had no role in the study design.",
    "Variant classification followed established clinical guidelines.",
    "Findings were robust to sensitivity analyses.",
)

INTRO_FILLERS = (
    "Hereditary predisposition accounts for a fraction of {cancer} cancer cases.",
    "Germline testing has expanded rapidly in clinical practice.",
    "Accurate penetrance estimates inform counseling and surveillance.",
    "Prior reports on moderate-risk genes remain heterogeneous.",
)

ABSTRACT_TEMPLATES = (
    "We evaluated germline variants among {cancer} cancer cases and controls.",
    "Panel sequencing identified pathogenic variants in several susceptibility genes.",
)

NR_RATE = 0.25  # chance a risk sentence gains a "not reported" clause


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int
    n_docs: int
    genes_per_doc: tuple[int, int] = (2, 3)
    estimate_range: tuple[float, float] = (0.4, 25.0)
    negative_pair_rate: float = 0.3

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValueError("n_docs must be >= 1")
        low, high = self.genes_per_doc
        if not (1 <= low <= high <= len(GENES)):
            raise ValueError(f"bad genes_per_doc range {self.genes_per_doc}")
        if not (0.0 <= self.negative_pair_rate <= 1.0):
            raise ValueError("negative_pair_rate must be in [0, 1]")
        if not (0 < self.estimate_range[0] < self.estimate_range[1]):
            raise ValueError(f"bad estimate range {self.estimate_range}")


@dataclass
class _Clause:
    gene: str
    estimate: str | None  # None for "NR" clauses
    ci: tuple[str, str] | None

    def render(self) -> str:
        if self.estimate is None:
            return f"{self.gene} (OR, NR)"
        if self.ci is None:
            return f"{self.gene} (OR, {self.estimate})"
        return f"{self.gene} (OR, {self.estimate}; 95% CI, {self.ci[0]}-{self.ci[1]})"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _sample_estimates(rng: random.Random, n: int, lo: float, hi: float,
                      taken: set[str]) -> list[str]:
    out: list[str] = []
    while len(out) < n:
        value = _fmt(rng.uniform(lo, hi))
        if value not in taken:
            taken.add(value)
            out.append(value)
    return out


def generate_synthetic_corpus(spec: SyntheticSpec
                              ) -> tuple[Corpus, list[RiskRecord], list[ERExample]]:
    """Corpus + ROD records + gold ER annotations, all from one seed."""
    rng = random.Random(spec.seed)
    documents: list[Document] = []
    records: list[RiskRecord] = []
    er_examples: list[ERExample] = []

    for doc_idx in range(spec.n_docs):
        pmid = str(90000000 + doc_idx)
        cancer = rng.choice(CANCERS)
        race = rng.choice(RACES)
        n_genes = rng.randint(*spec.genes_per_doc)
        genes = rng.sample(GENES, n_genes)

        taken: set[str] = set()
        clauses: list[_Clause] = []
        for gene in genes:
            estimate = _sample_estimates(rng, 1, *spec.estimate_range, taken)[0]
            ci = None
            if rng.random() < spec.negative_pair_rate:
                lo = _fmt(float(estimate) * 0.72)
                hi = _fmt(float(estimate) * 1.31)
                if lo != hi and lo not in taken and hi not in taken and float(lo) > 0:
                    taken.update((lo, hi))
                    ci = (lo, hi)
            clauses.append(_Clause(gene=gene, estimate=estimate, ci=ci))

        # Sentences hold 1-2 clauses; CI clauses go first so their
        # (gene, CI-low) negative pair stays within one default window.
        rng.shuffle(clauses)
        clauses.sort(key=lambda c: c.ci is None)
        risk_sentences: list[tuple[str, list[_Clause]]] = []
        i = 0
        while i < len(clauses):
            group = [clauses[i]]
            if i + 1 < len(clauses) and clauses[i + 1].ci is None and rng.random() < 0.5:
                group.append(clauses[i + 1])
                i += 1
            i += 1
            if len(group) == 1 and rng.random() < NR_RATE:
                spare = [g for g in GENES if g not in genes]
                group.append(_Clause(gene=rng.choice(spare), estimate=None, ci=None))
            lead = rng.choice(RISK_LEADINS)
            text = f"{lead} " + " and ".join(c.render() for c in group) + "."
            risk_sentences.append((text, group))

        n_asc = 3 if rng.random() < 0.6 else 2
        asc_templates = rng.sample(ASCERTAINMENT_TEMPLATES, n_asc)
        y0 = rng.randint(1985, 2005)
        asc_sentences = [t.format(region=rng.choice(REGIONS), y0=y0,
                                  y1=y0 + rng.randint(3, 15),
                                  n=rng.randint(50, 900), m=rng.randint(200, 3000),
                                  cancer=cancer.lower(), age=rng.choice((40, 45, 50, 55)))
                         for t in asc_templates]

        def fillers(pool, count):
            return [t.format(cancer=cancer.lower(), k=rng.randint(4, 18))
                    for t in rng.sample(pool, count)]

        abstract = " ".join(t.format(cancer=cancer.lower()) for t in ABSTRACT_TEMPLATES)
        intro = fillers(INTRO_FILLERS, rng.randint(2, 3))
        methods = []
        methods_fillers = fillers(FILLERS, rng.randint(2, 3))
        for j, sent in enumerate(asc_sentences):
            methods.append(sent)
            if j < len(methods_fillers):
                methods.append(methods_fillers[j])
        results = [text for text, _ in risk_sentences] + fillers(FILLERS, rng.randint(2, 3))

        doc = Document(pmid=pmid, source_format="text", sections=(
            Section("abstract", abstract, excluded=True),
            Section("introduction", " ".join(intro)),
            Section("methods", " ".join(methods)),
            Section("results", " ".join(results)),
        ))
        documents.append(doc)

        # Recover sentence ids and token offsets through the real segmenter so
        # gold annotations are guaranteed to align with pipeline tokenization.
        sent_lookup = {sent.text: (sent, tokens)
                       for sent, tokens in segment_and_tokenize(doc)}
        for text, group in risk_sentences:
            if text not in sent_lookup:
                raise AssertionError(f"planted sentence did not survive segmentation: {text!r}")
            sent, tokens = sent_lookup[text]
            surfaces = [t.token for t in tokens]
            entities: list[EntitySpan] = []
            relations: list[RelationPair] = []
            for clause in group:
                gene_tok = surfaces.index(clause.gene)
                entities.append(EntitySpan(gene_tok, gene_tok + 1, "germline_mutation"))
                gene_entity = len(entities) - 1
                if clause.estimate is None:
                    continue
                est_tok = surfaces.index(clause.estimate)
                entities.append(EntitySpan(est_tok, est_tok + 1, "risk_estimate"))
                relations.append(RelationPair(gene_entity, len(entities) - 1, "positive"))
                if clause.ci is not None:
                    lo_tok = surfaces.index(clause.ci[0])
                    entities.append(EntitySpan(lo_tok, lo_tok + 1, "risk_estimate"))
                    relations.append(RelationPair(gene_entity, len(entities) - 1, "negative"))
            er_examples.append(ERExample(
                pmid=pmid, sent_id=sent.sent_id, text=sent.text,
                tokens=list(tokens), entities=entities, relations=relations))

        for clause in group_positive_clauses(risk_sentences):
            records.append(RiskRecord(
                pmid=pmid, gene=clause.gene, cancer=cancer, race=race,
                or_=float(clause.estimate),
                max_age=rng.choice((None, 70, 75, 80)),
                total_carriers=rng.randint(20, 600),
                ascertainment_snippets=list(asc_sentences)))

    corpus = Corpus(documents=documents)
    return corpus, records, er_examples


def group_positive_clauses(risk_sentences) -> list[_Clause]:
    return [clause for _, group in risk_sentences for clause in group
            if clause.estimate is not None]


def planted_ascertainment_ids(corpus: Corpus, records: list[RiskRecord]
                              ) -> dict[str, set[int]]:
    """Gold positive sent_ids per document, recovered by exact text match of
    the planted snippets (they are verbatim sentences)."""
    from .riskdb import snippets_by_pmid

    snippets = snippets_by_pmid(records)
    out: dict[str, set[int]] = {}
    for doc in corpus.documents:
        planted = set(snippets.get(doc.pmid, ()))
        ids = {sent.sent_id for sent, _ in segment_and_tokenize(doc)
               if sent.text in planted}
        out[doc.pmid] = ids
    return out
