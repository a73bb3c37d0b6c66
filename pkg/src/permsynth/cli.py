"""CLI application entry point."""

import sys
from pathlib import Path
from typing import Any, Optional

import click
import numpy as np

from permsynth import __version__
from permsynth.core.config import get_settings
from permsynth.core.config_loader import get_topology_catalog, load_bench_config, load_train_config
from permsynth.core.exceptions import (
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_SYNTHESIS_FAILED,
    EXIT_USAGE,
    PermSynthError,
    VerificationError,
)
from permsynth.core.logging import configure_logging, get_logger
from permsynth.domain.entities.benchmark import BenchMethod
from permsynth.domain.entities.circuit import SwapCircuit
from permsynth.domain.entities.lattice import TopologyMask
from permsynth.domain.entities.manifest import RunManifest
from permsynth.domain.entities.training import (
    InferenceMode,
    RewardConfig,
    TopologyRegime,
    TrainConfig,
)
from permsynth.domain.services.policy_network import ENCODING_VERSION
from permsynth.domain.services.topology import build_lattice, resolve_topology
from permsynth.infrastructure.files.model_container import FORMAT_VERSION as MODEL_FORMAT_VERSION
from permsynth.infrastructure.files.text_format import TEXT_FORMAT_VERSION

# Configure logging on module import
configure_logging()
logger = get_logger(__name__)

FORMAT_VERSIONS = {
    "model container": MODEL_FORMAT_VERSION,
    "observation encoding": ENCODING_VERSION,
    "topology file": TEXT_FORMAT_VERSION,
    "permutation file": TEXT_FORMAT_VERSION,
    "circuit file": TEXT_FORMAT_VERSION,
}


class PermSynthGroup(click.Group):
    """Click group that maps failures onto the permsynth exit codes."""

    def main(self, *args: Any, **kwargs: Any) -> Any:  # type: ignore[override]
        kwargs["standalone_mode"] = False
        try:
            code = super().main(*args, **kwargs)
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo("Abortado!", err=True)
            sys.exit(EXIT_USAGE)
        except PermSynthError as e:
            logger.error("Command failed", error=str(e), error_type=type(e).__name__)
            click.echo(f"❌ Erro: {e}", err=True)
            sys.exit(e.exit_code)
        except Exception as e:
            logger.error("Unexpected failure", error=str(e), exc_info=True)
            click.echo(f"❌ Erro interno: {e}", err=True)
            sys.exit(EXIT_INTERNAL)
        sys.exit(code if isinstance(code, int) else EXIT_OK)


def _print_version(ctx: click.Context, param: click.Parameter, value: bool) -> None:
    if not value or ctx.resilient_parsing:
        return
    click.echo(f"permsynth {__version__}")
    for name, version in FORMAT_VERSIONS.items():
        click.echo(f"{name}: v{version}")
    ctx.exit()


# ============================================
# Helpers
# ============================================


def _default_out(command: str) -> Path:
    return Path(get_settings().output_dir) / command


def _threads(value: Optional[int]) -> int:
    return value if value is not None else get_settings().threads


def _load_topology(
    topology_ref: str, rows: Optional[int], cols: Optional[int], presets: Optional[Path]
) -> TopologyMask:
    """A topology file (dimensions from the file) or a preset / ``full`` on rows x cols."""
    from permsynth.infrastructure.files.topology_file import read_topology_file

    path = Path(topology_ref)
    if path.is_file():
        return read_topology_file(path)
    if rows is None or cols is None:
        raise click.UsageError("--rows e --cols são obrigatórios quando --topology não é um arquivo")
    return resolve_topology(topology_ref, build_lattice(rows, cols), presets)


def _save_manifest(
    command: str,
    out: Optional[Path],
    config: dict[str, Any],
    seed: Optional[int],
    threads: int = 1,
    artifacts: Optional[dict[str, Any]] = None,
) -> Path:
    """
    Write the run manifest beside the command's outputs.

    Directory outputs get ``manifest.json`` inside; file outputs get
    ``<file>.manifest.json`` next to them; stdout-only runs use the default
    output directory.
    """
    from permsynth.infrastructure.files.manifest_file import MANIFEST_NAME, write_manifest

    manifest = RunManifest(
        command=command,
        config=config,
        seed=seed,
        threads=threads,
        artifacts={k: str(v) for k, v in (artifacts or {}).items() if v is not None},
        formats={name.replace(" ", "_"): v for name, v in FORMAT_VERSIONS.items()},
    )
    if out is None:
        return write_manifest(manifest, _default_out(command), MANIFEST_NAME)
    if out.suffix:
        return write_manifest(manifest, out.parent, f"{out.name}.manifest.json")
    return write_manifest(manifest, out, MANIFEST_NAME)


def _emit_circuit(circuit: SwapCircuit, out: Optional[Path]) -> None:
    from permsynth.domain.services.synthesizer import verify
    from permsynth.infrastructure.files.circuit_file import format_circuit, write_circuit_file

    if not verify(circuit):
        raise VerificationError("circuit failed verification")
    if out is None:
        click.echo(format_circuit(circuit), nl=False)
    else:
        write_circuit_file(circuit, out)
        click.echo(f"💾 Circuito salvo em {out}", err=True)
    click.echo(f"✅ {circuit.gate_count} portas, profundidade {circuit.depth}", err=True)


presets_option = click.option(
    "--presets",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Arquivo YAML de presets de topologia (padrão: config/topologies.yaml)",
)
threads_option = click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=None,
    help="Threads para rollouts/avaliação; 1 é o modo determinístico de referência",
)


@click.group(cls=PermSynthGroup)
@click.option(
    "--version",
    is_flag=True,
    expose_value=False,
    is_eager=True,
    callback=_print_version,
    help="Mostra a versão e as versões dos formatos de arquivo",
)
def app() -> None:
    """PermSynth - Síntese de circuitos de permutação com RL em topologias de reticulado."""
    pass


# ============================================
# Training
# ============================================


def _train_overrides(**values: Any) -> dict[str, Any]:
    return {k: v for k, v in values.items() if v is not None}


@app.command()
@click.option(
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Arquivo YAML de treino (padrão: config/train.yaml)",
)
@click.option("--rows", type=click.IntRange(min=1), help="Linhas do reticulado")
@click.option("--cols", type=click.IntRange(min=1), help="Colunas do reticulado")
@click.option(
    "--regime",
    type=click.Choice([r.value for r in TopologyRegime]),
    help="Origem das topologias: generic, fixed ou forced_mix",
)
@click.option(
    "--topology",
    "--topology-file",
    "fixed_topology",
    help="Topologia do regime fixed (preset ou arquivo de topologia)",
)
@click.option(
    "--force-topology",
    "forced_topologies",
    multiple=True,
    help="Topologia forçada no regime forced_mix (repetível)",
)
@click.option("--force-prob", type=click.FloatRange(0, 1), help="Probabilidade de topologia forçada")
@click.option("--seed", type=click.IntRange(min=0), help="Semente")
@click.option("--iterations", type=click.IntRange(min=0), help="Iterações de PPO")
@threads_option
@presets_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Diretório de saída")
def train(
    config_file: Optional[Path],
    rows: Optional[int],
    cols: Optional[int],
    regime: Optional[str],
    fixed_topology: Optional[str],
    forced_topologies: tuple[str, ...],
    force_prob: Optional[float],
    seed: Optional[int],
    iterations: Optional[int],
    threads: Optional[int],
    presets: Optional[Path],
    out: Optional[Path],
) -> None:
    """Treina um modelo (genérico ou específico de topologia) com PPO + curriculum."""
    from permsynth.domain.services.ppo_trainer import train as run_training

    config_file = config_file or _existing(get_settings().train_config_file)
    cfg = load_train_config(
        config_file,
        _train_overrides(
            rows=rows,
            cols=cols,
            topology_regime=regime,
            fixed_topology=fixed_topology,
            forced_topologies=forced_topologies or None,
            force_prob=force_prob,
            seed=seed,
            max_iterations=iterations,
            threads=threads,
        ),
    )
    out = out or _default_out("train")

    click.echo(
        f"🚀 Treinando modelo {cfg.rows}x{cfg.cols} (regime {cfg.topology_regime.value}, "
        f"{cfg.max_iterations} iterações, seed {cfg.seed})"
    )
    result = run_training(cfg, out, presets)
    _report_training(result)
    _save_manifest(
        "train",
        out,
        cfg.model_dump(mode="json"),
        cfg.seed,
        cfg.threads,
        {"config": config_file, "model": result.model_path, "log": result.log_path, "output_dir": out},
    )


@app.command()
@click.option(
    "--base",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Modelo base (container .psm)",
)
@click.option(
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Arquivo YAML de treino (padrão: config/train.yaml)",
)
@click.option(
    "--regime",
    type=click.Choice([r.value for r in TopologyRegime]),
    help="Regime de ajuste (padrão: forced_mix quando há --force-topology)",
)
@click.option("--topology", "--topology-file", "fixed_topology", help="Topologia do regime fixed")
@click.option("--force-topology", "forced_topologies", multiple=True, help="Topologia forçada (repetível)")
@click.option("--force-prob", type=click.FloatRange(0, 1), help="Probabilidade de topologia forçada")
@click.option("--seed", type=click.IntRange(min=0), help="Semente")
@click.option("--iterations", type=click.IntRange(min=0), help="Iterações de PPO")
@threads_option
@presets_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Diretório de saída")
def finetune(
    base: Path,
    config_file: Optional[Path],
    regime: Optional[str],
    fixed_topology: Optional[str],
    forced_topologies: tuple[str, ...],
    force_prob: Optional[float],
    seed: Optional[int],
    iterations: Optional[int],
    threads: Optional[int],
    presets: Optional[Path],
    out: Optional[Path],
) -> None:
    """Ajusta um modelo existente, tipicamente misturando topologias forçadas."""
    from permsynth.domain.services.ppo_trainer import fine_tune
    from permsynth.infrastructure.files.model_container import load_model

    net = load_model(base)
    if regime is None and forced_topologies:
        regime = TopologyRegime.FORCED_MIX.value
    config_file = config_file or _existing(get_settings().train_config_file)
    cfg = load_train_config(
        config_file,
        _train_overrides(
            rows=net.lattice.rows,
            cols=net.lattice.cols,
            hidden_sizes=net.hidden_sizes,
            topology_regime=regime,
            fixed_topology=fixed_topology,
            forced_topologies=forced_topologies or None,
            force_prob=force_prob,
            seed=seed,
            max_iterations=iterations,
            threads=threads,
        ),
    )
    out = out or _default_out("finetune")

    click.echo(
        f"🔧 Ajustando {base} (regime {cfg.topology_regime.value}, "
        f"p={cfg.force_prob}, {cfg.max_iterations} iterações)"
    )
    result = fine_tune(net, cfg, out, presets)
    _report_training(result)
    _save_manifest(
        "finetune",
        out,
        cfg.model_dump(mode="json"),
        cfg.seed,
        cfg.threads,
        {"base_model": base, "config": config_file, "model": result.model_path, "log": result.log_path},
    )


def _existing(path: Path) -> Optional[Path]:
    return path if Path(path).is_file() else None


def _report_training(result: Any) -> None:
    click.echo("\n✅ Treinamento concluído!")
    click.echo("\n📊 Resumo:")
    click.echo(f"   • Iterações: {len(result.history)}")
    click.echo(f"   • Dificuldade final: {result.curriculum.difficulty}")
    if result.history:
        click.echo(f"   • Taxa de sucesso (última iteração): {result.history[-1].success_rate:.1%}")
    click.echo(f"   • Modelo: {result.model_path}")
    click.echo(f"   • Log: {result.log_path}")


# ============================================
# Synthesis and baselines
# ============================================


@app.command()
@click.option(
    "--model",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Modelo treinado (container .psm)",
)
@click.option("--topology", default="full", show_default=True, help="Preset, 'full' ou arquivo de topologia")
@click.option("--perm", required=True, help="Permutação: arquivo 'perm v1' ou lista (ex.: 1,0,2,3)")
@click.option(
    "--mode",
    type=click.Choice([m.value for m in InferenceMode]),
    default=InferenceMode.SAMPLING.value,
    show_default=True,
    help="Modo de inferência",
)
@click.option("--attempts", type=click.IntRange(min=1), default=10, show_default=True, help="Tentativas")
@click.option("--step-cap", type=click.IntRange(min=1), default=None, help="Limite de passos (padrão: 3k²)")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Semente")
@presets_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Arquivo de circuito")
@click.pass_context
def synth(
    ctx: click.Context,
    model: Path,
    topology: str,
    perm: str,
    mode: str,
    attempts: int,
    step_cap: Optional[int],
    seed: int,
    presets: Optional[Path],
    out: Optional[Path],
) -> None:
    """Sintetiza um circuito SWAP com o modelo treinado."""
    from permsynth.domain.services.synthesizer import synthesize
    from permsynth.infrastructure.files.model_container import load_model
    from permsynth.infrastructure.files.permutation_file import load_permutation_argument

    net = load_model(model)
    mask = _load_topology(topology, net.lattice.rows, net.lattice.cols, presets)
    permutation = load_permutation_argument(perm)
    inference = InferenceMode(mode)
    if inference is InferenceMode.GREEDY and attempts > 1:
        click.echo(f"⚠️  Modo greedy força attempts=1 (pedido: {attempts})", err=True)

    result = synthesize(
        net,
        permutation,
        mask,
        inference,
        attempts=attempts,
        step_cap=step_cap,
        rng=np.random.default_rng(seed),
    )
    _save_manifest(
        "synth",
        out,
        {"mode": mode, "attempts": attempts, "step_cap": step_cap, "topology": topology},
        seed,
        artifacts={"model": model, "circuit": out, "perm": perm},
    )
    if result.circuit is None:
        click.echo(
            f"❌ Síntese falhou: nenhuma das {result.attempts_used} tentativas chegou à identidade",
            err=True,
        )
        ctx.exit(EXIT_SYNTHESIS_FAILED)
    _emit_circuit(result.circuit, out)


@app.command()
@click.option("--topology", default="full", show_default=True, help="Preset, 'full' ou arquivo de topologia")
@click.option("--rows", type=click.IntRange(min=1), help="Linhas (ignorado para arquivos)")
@click.option("--cols", type=click.IntRange(min=1), help="Colunas (ignorado para arquivos)")
@click.option("--perm", required=True, help="Permutação: arquivo 'perm v1' ou lista")
@click.option("--trials", type=click.IntRange(min=1), default=1000, show_default=True, help="Tentativas")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Semente")
@presets_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Arquivo de circuito")
def tokenswap(
    topology: str,
    rows: Optional[int],
    cols: Optional[int],
    perm: str,
    trials: int,
    seed: int,
    presets: Optional[Path],
    out: Optional[Path],
) -> None:
    """Baseline: token swapping aproximado (melhor de N tentativas)."""
    from permsynth.domain.services.token_swapper import token_swap
    from permsynth.infrastructure.files.permutation_file import load_permutation_argument

    mask = _load_topology(topology, rows, cols, presets)
    circuit = token_swap(
        load_permutation_argument(perm), mask, trials, np.random.default_rng(seed)
    )
    _save_manifest(
        "tokenswap",
        out,
        {"topology": topology, "rows": mask.lattice.rows, "cols": mask.lattice.cols, "trials": trials},
        seed,
        artifacts={"circuit": out, "perm": perm},
    )
    _emit_circuit(circuit, out)


@app.command()
@click.option("--topology", default="full", show_default=True, help="Preset, 'full' ou arquivo de topologia")
@click.option("--rows", type=click.IntRange(min=1), help="Linhas (ignorado para arquivos)")
@click.option("--cols", type=click.IntRange(min=1), help="Colunas (ignorado para arquivos)")
@click.option("--perm", required=True, help="Permutação: arquivo 'perm v1' ou lista")
@presets_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Arquivo do circuito ótimo")
def oracle(
    topology: str,
    rows: Optional[int],
    cols: Optional[int],
    perm: str,
    presets: Optional[Path],
    out: Optional[Path],
) -> None:
    """Número mínimo exato de SWAPs (busca em largura; até 10 nós ativos)."""
    from permsynth.domain.services.swap_oracle import bfs_optimal
    from permsynth.infrastructure.files.circuit_file import write_circuit_file
    from permsynth.infrastructure.files.permutation_file import load_permutation_argument

    mask = _load_topology(topology, rows, cols, presets)
    result = bfs_optimal(load_permutation_argument(perm), mask)
    _save_manifest(
        "oracle",
        out,
        {"topology": topology, "rows": mask.lattice.rows, "cols": mask.lattice.cols},
        None,
        artifacts={"circuit": out, "perm": perm},
    )
    click.echo(result.swaps)
    if out is not None:
        write_circuit_file(result.circuit, out)
        click.echo(f"💾 Circuito ótimo salvo em {out}", err=True)


# ============================================
# Benchmark and inspection
# ============================================


@app.command()
@click.option(
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Suite YAML (ver config/bench.yaml)",
)
@click.option("--topology", "topologies", multiple=True, help="Topologia a avaliar (repetível)")
@click.option(
    "--method",
    "methods",
    multiple=True,
    type=click.Choice([m.value for m in BenchMethod]),
    help="Método a avaliar (repetível)",
)
@click.option("--instances", type=click.IntRange(min=0), help="Instâncias por topologia")
@click.option("--generic-model", type=click.Path(exists=True, dir_okay=False), help="Modelo genérico")
@click.option("--trials", type=click.IntRange(min=1), help="Tentativas do token swapper")
@click.option("--attempts", type=click.IntRange(min=1), help="Tentativas de amostragem dos modelos")
@click.option("--seed", type=click.IntRange(min=0), help="Semente")
@click.option("--no-timing", is_flag=True, help="Não mede tempos (time_ns=0, registros reprodutíveis)")
@threads_option
@presets_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Diretório de saída")
def bench(
    config_file: Optional[Path],
    topologies: tuple[str, ...],
    methods: tuple[str, ...],
    instances: Optional[int],
    generic_model: Optional[str],
    trials: Optional[int],
    attempts: Optional[int],
    seed: Optional[int],
    no_timing: bool,
    threads: Optional[int],
    presets: Optional[Path],
    out: Optional[Path],
) -> None:
    """Compara o modelo genérico com modelos específicos e token swapping."""
    from permsynth.domain.services.benchmark_service import (
        export,
        load_suite_models,
        run_suite,
        summarize,
    )

    cfg = load_bench_config(
        config_file,
        {
            "topologies": topologies or None,
            "methods": methods or None,
            "instances": instances,
            "generic_model": generic_model,
            "trials": trials,
            "attempts": attempts,
            "seed": seed,
            "threads": threads,
            "record_timing": False if no_timing else None,
        },
    )
    if not cfg.topologies:
        raise click.UsageError("nenhuma topologia: use --topology ou 'topologies' no arquivo")
    out = out or _default_out("bench")

    click.echo(
        f"📏 Benchmark: {len(cfg.topologies)} topologias x {cfg.instances} instâncias, "
        f"métodos {', '.join(m.value for m in cfg.methods)}"
    )
    records = run_suite(cfg, load_suite_models(cfg), presets)
    summary = summarize(records)
    paths = export(summary, records, out)

    click.echo("\n📊 Razões método / genérico (portas <0.95 | >1.05, profundidade <0.95 | >1.05):")
    for row in summary.rows:
        if row.method is BenchMethod.GENERIC:
            continue
        click.echo(
            f"   • {row.topology:<8} {row.method.value:<10} "
            f"{row.frac_lt_095_gates:6.1%} | {row.frac_gt_105_gates:6.1%}   "
            f"{row.frac_lt_095_depth:6.1%} | {row.frac_gt_105_depth:6.1%}"
            + (f"   falhas: {row.failures}" if row.failures else "")
        )
    click.echo(f"\n💾 Resultados em {out}")
    _save_manifest(
        "bench",
        out,
        cfg.model_dump(mode="json"),
        cfg.seed,
        cfg.threads,
        {"config": config_file, **paths},
    )


@app.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def inspect(model: Path) -> None:
    """Mostra as características de um modelo salvo."""
    from permsynth.infrastructure.files.model_container import describe_model

    info = describe_model(model)
    click.echo(f"🔎 Modelo: {info['path']}\n")
    click.echo(f"Reticulado:          {info['rows']}x{info['cols']}")
    click.echo(f"Entrada:             {info['input_size']}")
    click.echo(f"Camadas ocultas:     {info['hidden_sizes']}")
    click.echo(f"Ações:               {info['num_actions']}")
    click.echo(f"Parâmetros:          {info['parameter_count']}")
    click.echo(f"Parâmetros (fórmula): {info['analytic_parameter_count']}")
    click.echo(f"Tamanho:             {info['file_size_bytes']} bytes ({info['file_size_kb']} KB)")
    click.echo(f"Seed:                {info['seed']}")
    click.echo(f"Formato:             v{info['format_version']} (codificação v{info['encoding_version']})")
    _save_manifest("inspect", None, {}, info["seed"], artifacts={"model": model})


@app.command()
def config() -> None:
    """Mostra a configuração atual e os padrões de treino."""
    settings = get_settings()
    defaults = TrainConfig()
    rewards = RewardConfig()

    click.echo("⚙️  Configuração Atual:\n")
    click.echo(f"Environment:    {settings.environment}")
    click.echo(f"Debug:          {settings.debug}")
    click.echo(f"Log Level:      {settings.log_level}")
    click.echo(f"\nOutput Dir:     {settings.output_dir}")
    click.echo(f"Presets:        {settings.topologies_file}")
    click.echo(f"Train Config:   {settings.train_config_file}")
    click.echo(f"Threads:        {settings.threads}")

    catalog = get_topology_catalog()
    click.echo(f"\n🧩 Presets:      {', '.join(catalog.names())}")

    click.echo("\n🎯 Recompensas padrão:")
    click.echo(f"   • Sucesso:       {rewards.success_reward}")
    click.echo(f"   • Por porta:     {rewards.step_penalty}")
    click.echo("\n🧠 Treino padrão:")
    for name, value in defaults.model_dump(mode="json", exclude={"rewards"}).items():
        click.echo(f"   • {name}: {value}")


if __name__ == "__main__":
    app()
