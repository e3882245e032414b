"""Curate low-resource Indonesian text from geotagged social-media posts.

Stages: ingest JSONL records, geofence them to provincial capitals, drop
foreign-language and formal Indonesian posts, classify the informal remainder
by region, and tabulate the outcome per city.
"""

__version__ = "0.1.0"

from .cascade import (
    CascadeReport,
    CityTabulation,
    CorpusStatistics,
    run_cascade,
    summarize_statistics,
    tabulate_by_city,
)
from .dialect import DistanceMatrix, WordList, lexical_distance, pairwise_distance_matrix
from .formality import (
    EmbeddingDataset,
    FormalityHead,
    FormalityHeadConfig,
    classify_formality,
    head_forward,
    train_head,
)
from .geotag import CityAssigner, CityRegion, CityRegistry, assign_city, haversine_km
from .ingest import IngestReport, ingest_file, parse_tweet_line
from .langid import (
    NgramClassifier,
    NgramConfig,
    extract_char_ngrams,
    is_foreign,
    predict_language,
    train_ngram_model,
)
from .metrics import ConfusionMatrix, ClassMetrics, compute_metrics, confusion_matrix, stratified_split
from .records import CascadeLabel, GeoPoint, TweetRecord, normalize_text
from .region import RegionClassifier, confusion_by_city, predict_region, train_region_model
