import logging

from src.cli import cli

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def main():
    """Run the command-line surface."""
    try:
        cli()
    except Exception as e:
        logger.error(f"Failed to run command: {e}")
        raise


if __name__ == '__main__':
    main()
