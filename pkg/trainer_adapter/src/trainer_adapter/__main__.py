import argparse
import sys

from .adapter import AdapterConfig, serve_protocol


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="trainer_adapter",
        description="Serve the trainer wire protocol around a TF-IDF + SGD classifier.",
    )
    parser.add_argument(
        "config", nargs="?", default=None,
        help="JSON config file: {model, epochs, threshold, device}; defaults apply if omitted",
    )
    args = parser.parse_args(argv)
    config = AdapterConfig.from_file(args.config) if args.config else AdapterConfig()
    return serve_protocol(config)


if __name__ == "__main__":
    sys.exit(main())
