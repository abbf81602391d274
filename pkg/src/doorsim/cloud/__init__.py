"""Mock cloud layer: ingestion stream, dispatcher, stores, API gateway."""

from .notify import Notification, NotificationHub, Subscription, SubscriptionFilter
from .queries import QueryKind, QueryRequest, answer_query
from .service import ApiRequest, ApiResponse, CloudService
from .stores import BlobStore, CustomLabelJobs, MetadataStore
from .stream import Dispatcher, IngestStream, StreamRecord

__all__ = [
    "ApiRequest",
    "ApiResponse",
    "CloudService",
    "IngestStream",
    "StreamRecord",
    "Dispatcher",
    "MetadataStore",
    "BlobStore",
    "CustomLabelJobs",
    "NotificationHub",
    "Notification",
    "Subscription",
    "SubscriptionFilter",
    "QueryKind",
    "QueryRequest",
    "answer_query",
]
