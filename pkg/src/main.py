import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional
from pydantic import ValidationError
from src.config.loader import load_config
from src.config.settings import AppConfig
from src.errors import ConfigError, GeometryError, SolverError, TransferError
from src.io.writers import OutputSession
from src.ui.commands import cmd_cell, cmd_hmm, cmd_musweep, cmd_solve, cmd_study

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

COMMANDS = ("cell", "musweep", "solve", "hmm", "study")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxwell-hmm",
                                     description="Multiscale solver for Maxwell scattering by high-contrast media")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="JSON (or YAML) run configuration")
    parser.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
    parser.add_argument("--threads", type=int, default=1, help="Worker threads for sweeps and studies")
    parser.add_argument("--k", type=float, default=None, help="Override the wavenumber")
    parser.add_argument("--mesh-n", type=int, default=None,
                        help="Override the mesh resolution: cell mesh for cell/musweep, macro mesh otherwise")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--dump-matrices", action="store_true",
                        help="Write the macro system matrix in Matrix Market format to the output directory")
    return parser


def apply_overrides(config: AppConfig, command: str, k: Optional[float], mesh_n: Optional[int]) -> AppConfig:
    """Command-line overrides, validated like the configuration file"""
    data = config.dict()
    if k is not None:
        data["scatter"]["k"] = k
    if mesh_n is not None:
        data["micro" if command in ("cell", "musweep") else "scatter"]["mesh_n"] = mesh_n
    try:
        return AppConfig(**data)
    except ValidationError as e:
        logger.error("Invalid override: %s", e)
        raise ConfigError(f"Invalid override: {e}") from e


def run(args: argparse.Namespace) -> None:
    config = load_config(str(args.config)) if args.config is not None else AppConfig()
    config = apply_overrides(config, args.command, args.k, args.mesh_n)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    dump_dir = args.out if args.dump_matrices else None
    with OutputSession(args.out) as out:
        if args.command == "cell":
            cmd_cell(config, out)
        elif args.command == "musweep":
            cmd_musweep(config, out, args.threads)
        elif args.command == "solve":
            cmd_solve(config, out, dump_dir)
        elif args.command == "hmm":
            cmd_hmm(config, out, dump_dir)
        elif args.command == "study":
            cmd_study(config, out, args.threads)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except (ConfigError, GeometryError, TransferError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        print(f"Solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
