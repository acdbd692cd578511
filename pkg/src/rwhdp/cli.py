"""Command-line entry point: ``rwhdp {generate-walks,fit,assign,score,pipeline}``.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines; keys are
flag names (``batch-size`` or ``batch_size``) and explicit flags override them.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import community, corpus as corpus_mod, graph as graph_mod, hdp
from ._io import atomic_write

log = logging.getLogger("rwhdp")

EXIT_USAGE = 2


class CliError(Exception):
    """An input problem that should end the run with exit code 2."""


def read_config_file(path: str) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _add_common(p):
    p.add_argument("--config", help="key = value file supplying defaults for any flag")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1,
                   help="parallel workers; affects speed only")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_walk_flags(p):
    p.add_argument("--walks", default=f"{corpus_mod.DEFAULT_WALKS_PER_NODE}x",
                   help="number of walks, absolute or 'Nx' times the node count (default 5x)")
    p.add_argument("--length", type=float, default=corpus_mod.DEFAULT_LENGTH,
                   help="expected walk length (Poisson mean, default 100)")


def _add_model_flags(p):
    defaults = hdp.HdpConfig()
    p.add_argument("--K", "--topics", dest="K", type=int, default=defaults.K,
                   help="corpus-level truncation")
    p.add_argument("--T", "--doc-topics", dest="T", type=int, default=defaults.T,
                   help="document-level truncation")
    p.add_argument("--eta", type=float, default=defaults.eta)
    p.add_argument("--gamma", type=float, default=defaults.gamma)
    p.add_argument("--alpha", type=float, default=defaults.alpha)
    p.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p.add_argument("--kappa", type=float, default=defaults.kappa)
    p.add_argument("--tau", type=float, default=defaults.tau)
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--max-local-iters", type=int, default=defaults.max_local_iters)
    p.add_argument("--local-tol", type=float, default=defaults.local_tol)
    p.add_argument("--holdout", type=float, nargs="?", const=0.1, default=None,
                   help="hold out the last fraction of walks (default 0.1) and report "
                        "perplexity after each epoch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwhdp",
        description="Community detection with random walks and an HDP topic model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-walks", help="sample the random-walk corpus")
    p.add_argument("--graph", required=True, help="edge list: 'u v [weight]' per line")
    p.add_argument("--out", required=True, help="corpus file to write")
    p.add_argument("--label-map", help="label map to write (default: OUT.labels)")
    _add_walk_flags(p)
    _add_common(p)

    p = sub.add_parser("fit", help="fit the HDP topic model to a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--label-map", help="label map written with the corpus (default: CORPUS.labels)")
    p.add_argument("--out", required=True, help="model checkpoint to write")
    _add_model_flags(p)
    _add_common(p)

    p = sub.add_parser("assign", help="assign every node to its most probable community")
    p.add_argument("--model", required=True)
    p.add_argument("--label-map", required=True)
    p.add_argument("--graph", help="optional edge list to check the node count against")
    p.add_argument("--out", required=True, help="partition file to write")
    _add_common(p)

    p = sub.add_parser("score", help="score a partition")
    p.add_argument("--graph", required=True)
    p.add_argument("--labels", required=True, help="partition file: 'node_label community_id'")
    p.add_argument("--out", required=True, help="report file, or '-' for standard output")
    _add_common(p)

    p = sub.add_parser("pipeline", help="walks, fit, assign and score in one run")
    p.add_argument("--graph", required=True)
    p.add_argument("--out-dir", required=True)
    _add_walk_flags(p)
    _add_model_flags(p)
    _add_common(p)
    parser.subcommands = sub.choices
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = read_config_file(args.config)
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc.strerror}") from None
        sub = parser.subcommands[args.command]
        known = {a.dest: a for a in sub._actions}
        converted = {}
        for key, text in values.items():
            if key not in known or key in ("config", "help"):
                raise CliError(f"{args.config}: unknown key {key!r} for {args.command}")
            action = known[key]
            if action.type is not None:
                try:
                    converted[key] = action.type(text)
                except (ValueError, argparse.ArgumentTypeError):
                    raise CliError(f"{args.config}: bad value for {key}: {text!r}") from None
            elif isinstance(action, argparse._StoreTrueAction):
                converted[key] = text.lower() in ("1", "true", "yes", "on")
            else:
                converted[key] = text
        sub.set_defaults(**converted)
        args = parser.parse_args(argv)
    return args


def _config_from(args) -> hdp.HdpConfig:
    return hdp.HdpConfig(
        K=args.K, T=args.T, eta=args.eta, gamma=args.gamma, alpha=args.alpha,
        batch_size=args.batch_size, kappa=args.kappa, tau=args.tau, epochs=args.epochs,
        max_local_iters=args.max_local_iters, local_tol=args.local_tol)


def _load_graph(path) -> graph_mod.Graph:
    try:
        with open(path, encoding="utf-8") as fh:
            return graph_mod.load_edge_list(fh)
    except graph_mod.GraphFormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def _load_label_map(path) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return graph_mod.load_label_map(fh)
    except graph_mod.GraphFormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def _check_distinct(*paths):
    real = [os.path.realpath(p) for p in paths if p and p != "-"]
    if len(set(real)) != len(real):
        raise CliError("output paths must be distinct")


def _generate(g, args, corpus_path, label_path):
    num_walks = corpus_mod.resolve_num_walks(args.walks, g.num_nodes)
    start = time.perf_counter()
    walks = corpus_mod.generate_corpus(g, num_walks, args.length, args.seed, args.workers)
    corpus_mod.save_corpus(walks, corpus_path)
    with atomic_write(label_path) as fh:
        graph_mod.write_label_map(g, fh)
    elapsed = time.perf_counter() - start
    mean_len = walks.num_tokens / len(walks)
    log.info("walks D=%d mean_length=%.2f elapsed=%.2fs", len(walks), mean_len, elapsed)
    return walks


def _fit(walks, config, args, model_path):
    train, test = walks, None
    if args.holdout is not None:
        train, test = walks.split_holdout(args.holdout)

    def report(epoch, state):
        if test is not None:
            log.info("epoch %d held-out perplexity %.4f", epoch,
                     hdp.perplexity(test, state, config))
        else:
            log.info("epoch %d done (%d steps)", epoch, state.step_count)

    start = time.perf_counter()
    state = hdp.fit(train, config, args.seed, args.workers, callback=report)
    hdp.save_model(model_path, state, config)
    log.info("fit %d documents in %.2fs", len(train), time.perf_counter() - start)
    return state


def _assign(state, labels, out_path):
    partition = community.assign(community.node_posteriors(state))
    with atomic_write(out_path) as fh:
        community.write_partition(labels, partition, fh)
    log.info("communities %d", partition.num_communities)
    return partition


def _score(g, partition, out_path):
    text = community.format_report(g, partition)
    if out_path == "-":
        sys.stdout.write(text)
    else:
        with atomic_write(out_path) as fh:
            fh.write(text)
    return text


def cmd_generate_walks(args):
    label_path = args.label_map or args.out + ".labels"
    _check_distinct(args.out, label_path, args.graph)
    g = _load_graph(args.graph)
    _generate(g, args, args.out, label_path)


def cmd_fit(args):
    label_path = args.label_map or args.corpus + ".labels"
    _check_distinct(args.out, args.corpus, label_path)
    config = _config_from(args)
    labels = _load_label_map(label_path)
    try:
        walks = corpus_mod.load_corpus(args.corpus, vocab_size=len(labels))
    except corpus_mod.CorpusFormatError as exc:
        raise CliError(f"{args.corpus}: {exc} (label map has {len(labels)} nodes)") from None
    _fit(walks, config, args, args.out)


def cmd_assign(args):
    labels = _load_label_map(args.label_map)
    try:
        state, _ = hdp.load_model(args.model)
    except hdp.CheckpointError as exc:
        raise CliError(str(exc)) from None
    if state.V != len(labels):
        raise CliError(f"model has {state.V} nodes but label map has {len(labels)}")
    if args.graph:
        g = _load_graph(args.graph)
        if g.num_nodes != state.V:
            raise CliError(f"model has {state.V} nodes but graph has {g.num_nodes}")
        if list(g.labels) != labels:
            raise CliError("graph node labels do not match the label map")
    _assign(state, labels, args.out)


def cmd_score(args):
    g = _load_graph(args.graph)
    try:
        with open(args.labels, encoding="utf-8") as fh:
            partition = community.read_partition(fh, g.labels)
    except community.PartitionFormatError as exc:
        raise CliError(f"{args.labels}: {exc}") from None
    _score(g, partition, args.out)


def cmd_pipeline(args):
    os.makedirs(args.out_dir, exist_ok=True)
    paths = {name: os.path.join(args.out_dir, name) for name in
             ("corpus.txt", "labelmap.txt", "model.ckpt", "labels.txt", "report.txt")}
    config = _config_from(args)
    g = _load_graph(args.graph)
    walks = _generate(g, args, paths["corpus.txt"], paths["labelmap.txt"])
    state = _fit(walks, config, args, paths["model.ckpt"])
    partition = _assign(state, g.labels, paths["labels.txt"])
    _score(g, partition, paths["report.txt"])
    log.info("modularity %.6f", community.modularity(g, partition))


COMMANDS = {
    "generate-walks": cmd_generate_walks,
    "fit": cmd_fit,
    "assign": cmd_assign,
    "score": cmd_score,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    log.propagate = False
    try:
        args = parse_args(argv)
        if args.verbose:
            log.setLevel(logging.DEBUG)
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"rwhdp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        name = exc.filename if exc.filename else ""
        print(f"rwhdp: error: {name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"rwhdp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        log.removeHandler(handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
