"""annoloop: a deterministic simulator for iterative bounding-box annotation
campaigns.

Replays fully labeled datasets through a train-propose-correct loop, counts
the manual correction work a human annotator would have performed, and
compares image orderings and training regimes.  See the README for the
canonical dataset format, the detector wire protocol, and the CLI.
"""

from .campaign import (
    CampaignConfig,
    CampaignReport,
    PerClassResult,
    PhaseTimings,
    run_campaign,
    run_per_class,
    run_two_stage,
)
from .dataset_io import (
    Dataset,
    GroundTruthObject,
    ImageRecord,
    ParseError,
    ParseResult,
    filter_objects,
    load_canonical,
    parse_coco,
    parse_openimages,
    parse_voc,
    read_canonical,
    save_canonical,
    write_canonical,
)
from .detectors import (
    DetectorSession,
    NullDetector,
    PerfectDetector,
    ScriptedDetector,
    SyntheticDetector,
    SyntheticDetectorConfig,
    skill,
)
from .bridge import (
    BridgeSession,
    HandshakeError,
    LaunchSpec,
    ProtocolError,
    TransportError,
    bridge_session,
)
from .geometry import BoundingBox, DegenerateBox, area, clamp_to_image, iou
from .matching import (
    Detection,
    MatchPair,
    MatchResult,
    UnknownImage,
    apply_confidence_threshold,
    match_batch,
    match_image,
    precision,
    recall,
)
from .scheduling import (
    Batch,
    OrderingStrategy,
    UnknownClass,
    class_scope,
    make_batches,
    order_images,
)
from .synthetic import make_synthetic_dataset
from .workload import (
    BatchWorkload,
    CurvePoint,
    EmptyCampaign,
    ImageCount,
    UndefinedReduction,
    batch_workload,
    cumulative_curves,
    manual_batch_workload,
    whole_campaign_reduction,
    workload_reduction,
)

__version__ = "0.1.0"
