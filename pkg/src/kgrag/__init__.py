"""kgrag: knowledge-graph retrieval-augmented generation engine for
medical natural-language-explanation pipelines."""

from .kg_store import (Triplet, TripletRecord, build_datastore,
                       canonical_text, filter_by_relation, load_datastore,
                       parse_export, save_datastore)
from .metrics import (EvalPair, bleu4, cider_d, make_pair, meteor_corpus,
                      meteor_lite, rouge_l, rouge_l_corpus, tokenize)
from .pathology import (Certainty, DenseWeights, PathologyPrediction,
                        ThresholdConfig, certainty, classify, forward,
                        load_weights, macro_auc, project, roc_auc,
                        save_weights)
from .prompts import (TEMPLATES, GenerationRequest, GenerationResponse,
                      HttpBackend, PromptBundle, StubBackend,
                      assemble_prompt, generate, render_pathology_phrase,
                      select_template)
from .vector_index import (EmbeddingVector, FlatIndex, IvfIndex,
                           RetrievalHit, build_flat, build_ivf, cosine,
                           load_embeddings, load_index, save_embeddings,
                           save_index, search_ivf, top_k)

__version__ = "0.1.0"
