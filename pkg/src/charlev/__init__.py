"""Character-level Levenshtein attacks and adversarial finetuning for text encoders."""

__version__ = "0.1.0"

from .attacks import (AttackConfig, AttackResult, BudgetExceededError,
                      ClassificationCE, CountingEncoder, EmbedDistance,
                      NegSelfSimilarity, TargetSimilarity, bruteforce_attack,
                      charmer_attack, count_encoder_calls, leaf_attack,
                      random_attack)
from .dataio import (EmbeddingStore, TextRecord, load_jsonl, read_store,
                     synth_corpus, synth_topics, write_jsonl, write_store)
from .encoder import (CharEncoder, EncoderParams, bigram_buckets, cosine_sim,
                      init_params, load_params, params_for_alphabet, save_params)
from .evalsuite import (AnchorSet, InversionResult, RetrievalGallery,
                        adversarial_accuracy, bleu, clean_accuracy,
                        invert_embedding, recall_at_k, retrieval_attack,
                        token_recall, word_recall, zero_shot_predict)
from .lexicon import Lexicon, count_words, default_lexicon, load_lexicon, valid
from .textspace import (Alphabet, apply_edit, contract, enumerate_edits,
                        expand, levenshtein, load_alphabet, replace_at,
                        save_alphabet)
from .trainer import (OptimizerState, TrainConfig, adamw_step, lr_at,
                      textfare_loss, train)
