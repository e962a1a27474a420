import argparse
import json
import logging
import sys

from .data import DataError
from .model import ArtifactError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cwescan-trainer")
    sub = parser.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="fine-tune on an instance JSONL file")
    t.add_argument("--config", required=True, help="JSON run configuration")
    s = sub.add_parser("serve", help="serve an artifact over the native completion protocol")
    s.add_argument("--artifact", required=True)
    s.add_argument("--bind", default="127.0.0.1:8080", help="host:port (port 0 picks a free one)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    try:
        if args.command == "train":
            from .train import ConfigError, TrainConfig, train

            try:
                cfg = TrainConfig.load(args.config)
            except (ConfigError, json.JSONDecodeError, OSError) as e:
                print(f"error: {args.config}: {e}", file=sys.stderr)
                return 2
            manifest = train(cfg, log=lambda m: print(m, file=sys.stderr))
            print(json.dumps({"output_dir": cfg.output_dir, "final_loss": manifest["final_loss"]}))
            return 0

        from .serve import CompletionServer

        host, _, port = args.bind.rpartition(":")
        server = CompletionServer(args.artifact, host or "127.0.0.1", int(port))
        print(f"serving on http://{host or '127.0.0.1'}:{server.port}/", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        return 0
    except (DataError, ArtifactError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
