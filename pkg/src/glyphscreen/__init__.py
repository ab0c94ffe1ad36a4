"""glyphscreen: tablet-based dysgraphia screening toolkit.

Pipeline: synthetic cursive corpora -> pen-trajectory preprocessing ->
from-scratch sequence/image recognizers -> per-child D statistic with a
calibrated screening threshold -> cross-validated experiment reports ->
a live screening HTTP service.
"""

from .glyphs import ALL_GLYPHS, REAL_GLYPHS, NUM_CLASSES, glyph_code, glyph_index
from .recording import (GlyphRecording, RecordingError, SamplePoint,
                        load_recordings, parse_recording_file, save_recordings,
                        serialize_recordings)
from .preprocess import (DegenerateTrajectoryError, FeatureSequence, GlyphImage,
                         NormalizedTrajectory, normalize, rasterize,
                         to_sequence_features)
from .splits import DatasetSplit, split_dataset
from .templates import DESIGNED_LOOKALIKE_PAIRS, GlyphTemplate, get_template
from .synthesis import (CorpusConfig, WriterProfile, corpus_manifest,
                        generate_corpus, synthesize_glyph)
from .augment import augment_training_set, make_star_hybrid
from .recognizer import (ConfusionMatrix, TrainedRecognizer, TrainingHyper,
                         confusion_matrix, load_model, predict_proba,
                         prefix_timeline, save_model, train)
from .diagnosis import (Calibration, ChildSession, DiagnosisReport,
                        DiscriminativeRanking, calibrate_threshold, d_statistic,
                        d_statistic_subset, diagnose, glyph_level_means,
                        pair_confusion, rank_discriminative, score_session,
                        sessions_from_recordings, subset_for_fold, verdict)
from .evaluation import (CVReport, detection_rate, emit_confusion_comparison,
                         emit_discriminative_scatter, emit_quantile_data,
                         run_cross_validation)

__version__ = "0.1.0"
