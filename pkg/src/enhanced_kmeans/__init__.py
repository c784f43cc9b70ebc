"""K-means with joint cluster refinement and Chebyshev-threshold outlier detection."""

from .data import DatasetSpec, SynthConfig, generate_synthetic, load_csv, load_dataset, save_csv, standardize
from .errors import DataError, EnhancedKMeansError, NumericError
from .experiments import run_experiment, run_sweep, summarize
from .kmeans import (
    ClusteringState,
    assign_points,
    average_variance,
    cluster_variance,
    euclidean_distance,
    lloyd_kmeans,
    update_centroids,
)
from .metrics import (
    MetricsReport,
    accuracy_and_f1,
    calinski_harabasz,
    davies_bouldin,
    distance_ratio,
    evaluate_clustering,
    jaccard_weighted,
    map_clusters_to_labels,
    silhouette_score,
    v_measure,
)
from .outliers import (
    EnhancedConfig,
    EnhancedResult,
    IterationTrace,
    OutlierRecord,
    chebyshev_threshold,
    enhanced_kmeans,
    per_cluster_distances,
    remove_outliers_once,
)

__version__ = "0.1.0"
