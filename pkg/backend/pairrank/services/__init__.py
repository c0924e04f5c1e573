from pairrank.services.export_service import ExportService
from pairrank.services.ingest_service import IngestService
from pairrank.services.path_service import PathService
from pairrank.services.ranking_service import RankingService
from pairrank.services.simulation_service import SimulationService

__all__ = ["ExportService", "IngestService", "PathService", "RankingService", "SimulationService"]
