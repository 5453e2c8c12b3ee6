"""Bridge command line: serve a model over the wire protocol, or fine-tune."""

from __future__ import annotations

import argparse
import sys

from .backend import ModelLoadError, load_backend
from .formats import DataFormatError
from .protocol import (
    DEFAULT_TOPK,
    BridgeServer,
    report_load_failure_and_exit,
    serve_stdio,
    serve_tcp,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="absabridge")
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="serve a model over ndjson")
    serve.add_argument(
        "--model",
        required=True,
        help="hf:<id or path>, toy:<corpus.jsonl>, or checkpoint:<dir>",
    )
    serve.add_argument("--device", default="cpu")
    serve.add_argument("--top-k", type=int, default=DEFAULT_TOPK,
                       help="entries returned by unmasked step requests")
    serve.add_argument("--tcp", type=int, default=None, metavar="PORT",
                       help="listen on 127.0.0.1:PORT instead of stdio")

    train = commands.add_parser("train", help="fine-tune on marker-format pairs")
    train.add_argument("--model", required=True)
    train.add_argument("--task", required=True)
    train.add_argument("--train", dest="train_path", required=True)
    train.add_argument("--dev", dest="dev_path", default=None)
    train.add_argument("--out-dir", required=True)
    train.add_argument("--epochs", type=int, default=20)
    train.add_argument("--batch-size", type=int, default=16)
    train.add_argument("--learning-rate", type=float, default=None,
                       help="defaults to the model family's rate")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--device", default="cpu")

    args = parser.parse_args(argv)

    if args.command == "serve":
        try:
            backend = load_backend(args.model, device=args.device)
        except ModelLoadError as err:
            report_load_failure_and_exit(sys.stdin, sys.stdout, str(err))
            return 1
        server = BridgeServer(backend, top_k=args.top_k)
        if args.tcp is not None:
            serve_tcp(server, "127.0.0.1", args.tcp)
        else:
            serve_stdio(server)
        return 0

    from .training import TrainConfig, fine_tune

    try:
        result = fine_tune(
            TrainConfig(
                model=args.model,
                task=args.task,
                train_path=args.train_path,
                dev_path=args.dev_path,
                out_dir=args.out_dir,
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                seed=args.seed,
                device=args.device,
            )
        )
    except (DataFormatError, ModelLoadError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    losses = " ".join(f"{rec.train_loss:.4f}" for rec in result.log)
    print(f"selection={result.selection} checkpoint={result.checkpoint}")
    print(f"train_loss per epoch: {losses}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
