import argparse
import logging
import sys

from hydrolab.experiments import EXIT_ERROR, EXPERIMENTS, run
from hydrolab.ExperimentConfig import parse_config

LOG_FORMAT = "%(message)s"

logger = logging.getLogger(__name__)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hydrolab", description="Run particle-to-hydrodynamics experiments"
    )
    parser.add_argument(
        "--log-level",
        "-l",
        help="Log level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default="INFO",
    )
    parser.add_argument("experiment", metavar="EXPERIMENT", choices=EXPERIMENTS.keys(), help="Experiment kind")
    parser.add_argument("--config", "-c", required=True, help="JSON experiment configuration")
    parser.add_argument("--force", action="store_true", help="Overwrite an existing output directory")
    parser.add_argument("--threads", type=int, help="Worker threads (default $HYDROLAB_THREADS or 1)")
    parser.add_argument("--seed", type=int, help="Override the configured root seed")
    parser.add_argument("--output", "-o", help="Override the configured output directory")
    args = parser.parse_args(argv)

    try:
        from rich.logging import RichHandler

        handlers = [RichHandler()]
    except ImportError:
        handlers = [logging.StreamHandler()]

    logging.basicConfig(
        level=args.log_level, format=LOG_FORMAT, datefmt="[%X]", handlers=handlers, force=True
    )

    try:
        logger.info("Reading %s", args.config)
        config = parse_config(args.config).with_overrides(seed=args.seed, output=args.output)
        if config.kind != args.experiment:
            raise ValueError(f"{args.config} configures a {config.kind!r} experiment, not {args.experiment!r}")
    except Exception as e:
        if args.log_level == "DEBUG":
            raise e
        logger.error("Couldn't read %s: %s", args.config, e)
        return EXIT_ERROR

    try:
        return run(config, force=args.force, threads=args.threads)
    except Exception as e:
        if args.log_level == "DEBUG":
            raise e
        logger.error("%s experiment failed: %s", config.kind, e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
