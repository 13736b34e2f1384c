"""WiFi channel-state motion sensing toolkit.

Decode binary CSI packets, scale them to absolute amplitude, stream them
over TCP into a durable log, detect motion through windowed variance,
learn a shape library for anomaly detection, and classify activities
with wavelet features or a recurrent network.
"""

from .anomaly import ShapeAnomalyDetector, load_library, save_library
from .classify import (
    LABELS,
    DecisionTreeActivityClassifier,
    GaussianNaiveBayesActivityClassifier,
    HaarFeatureExtractor,
    LstmActivityClassifier,
    load_dataset,
    load_model,
    save_model,
    write_dataset,
)
from .dsp import (
    AmplitudePipeline,
    AmplitudeRecord,
    DspConfig,
    amplitude_db,
    compute_scale,
    moving_average,
    windowed_variance,
)
from .exceptions import CsiSentryError
from .store import RecordLog
from .synth import ChannelConfig, MotionEvent, gen_activity_dataset, gen_stream
from .transport import (
    IngestServer,
    IngestStats,
    default_port,
    read_capture,
    stream_packets,
    write_capture,
)
from .wire import CsiHeader, CsiPacket, decode_packet, encode_packet

__version__ = "0.1.0"

__all__ = [
    "AmplitudePipeline",
    "AmplitudeRecord",
    "ChannelConfig",
    "CsiHeader",
    "CsiPacket",
    "CsiSentryError",
    "DecisionTreeActivityClassifier",
    "DspConfig",
    "GaussianNaiveBayesActivityClassifier",
    "HaarFeatureExtractor",
    "IngestServer",
    "IngestStats",
    "LABELS",
    "LstmActivityClassifier",
    "MotionEvent",
    "RecordLog",
    "ShapeAnomalyDetector",
    "amplitude_db",
    "compute_scale",
    "decode_packet",
    "default_port",
    "encode_packet",
    "gen_activity_dataset",
    "gen_stream",
    "load_dataset",
    "load_library",
    "load_model",
    "moving_average",
    "read_capture",
    "save_library",
    "save_model",
    "stream_packets",
    "windowed_variance",
    "write_capture",
    "write_dataset",
    "__version__",
]
