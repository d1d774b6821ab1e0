from dotenv import load_dotenv
import os
import logging

logger = logging.getLogger(__name__)

# Config
class Config:
    # Numerical tolerances shared by every module
    HERMITIAN_TOL = 1e-10
    STATE_NORM_TOL = 1e-12
    DENSITY_TOL = 1e-10
    DICHOTOMIC_TOL = 1e-9
    COMMUTATOR_TOL = 1e-9
    IDENTITY_TOL = 1e-9
    PROJECTOR_TOL = 1e-9
    CLUSTER_TOL = 1e-8
    PROBABILITY_FLOOR = -1e-12
    PROBABILITY_TOTAL_TOL = 1e-10
    EXPECTATION_IMAG_TOL = 1e-10

    # Caps
    MAX_DIM = 64
    MAX_ASSIGNMENTS = 2 ** 20
    MAX_ROUNDS = 10 ** 8
    MAX_FIELD_SAMPLES = 10 ** 6
    MAX_SCAN = 10 ** 5

    # Monte Carlo
    RNG_CHUNK = 65536
    VIOLATION_Z = 5.0
    PASS_Z = 5.0
    MIN_ROUNDS = 1000
    MIN_FIELD_SAMPLES = 1000

    def __init__(self):
        load_dotenv()

        # Default worker count for scans and sampling
        self.WORKERS = os.getenv('CHSH_LAB_WORKERS', '1')

        self._validate_config()

    def _validate_config(self):
        """Validate all required configurations are present."""
        try:
            self.WORKERS = int(self.WORKERS)
        except ValueError:
            raise ValueError(f"CHSH_LAB_WORKERS must be an integer, got {self.WORKERS!r}")
        if self.WORKERS < 1:
            raise ValueError(f"CHSH_LAB_WORKERS must be positive, got {self.WORKERS}")
        logger.debug(f"Default worker count: {self.WORKERS}")

# Create global config instance
config = Config()
