"""Pipeline configuration: load, validate, override, serialize.

All knobs live in one immutable ``PipelineConfig`` tree loaded from a YAML
file, then layered with overrides from env vars (``FINRAG_`` prefix, ``__``
as path separator) and dotted-path key/value pairs (``--set retriever.top_k=10``,
``PATCH /config``). Precedence: explicit overrides > env > file > defaults.

Unknown keys are hard errors. Fusion weights are normalized to sum to 1 at
load time so downstream code never re-normalizes.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Any, Mapping

import yaml

ENV_PREFIX = "FINRAG_"

RETRIEVER_TYPES = ("bm25", "vector", "hybrid", "auto_merging")
PROMPT_TYPES = ("standard", "few_shot", "chain_of_thought", "persona")


class ConfigError(ValueError):
    """Raised for parse failures, unknown keys, or constraint violations."""


@dataclass(frozen=True)
class LlmConfig:
    provider: str = "mock"
    model: str = "mock-chat"
    temperature: float = 0.7
    top_p: float = 0.9
    max_tokens: int = 1024


@dataclass(frozen=True)
class RetrieverConfig:
    type: str = "hybrid"
    top_k: int = 5
    w_bm25: float = 0.4
    w_vector: float = 0.6


@dataclass(frozen=True)
class ChunkParams:
    chunk_size_tokens: int = 512
    overlap_tokens: int = 64
    embedding_provider: str = "local_hash"
    embedding_dim: int = 64


@dataclass(frozen=True)
class PromptConfig:
    prompt_type: str = "standard"
    persona: str | None = None


@dataclass(frozen=True)
class EvalConfig:
    faithfulness_threshold: float = 0.7
    relevancy_threshold: float = 0.7
    judge_model: str = "mock-judge"
    seed: int = 13


@dataclass(frozen=True)
class RoutingConfig:
    force_rag: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    llm: LlmConfig = LlmConfig()
    retriever: RetrieverConfig = RetrieverConfig()
    ingestion: ChunkParams = ChunkParams()
    prompt: PromptConfig = PromptConfig()
    evaluation: EvalConfig = EvalConfig()
    routing: RoutingConfig = RoutingConfig()


# Dotted path -> (section attr, field attr, type). The single source of truth
# for override addressing; weights keep their external "retriever.weights.*"
# spelling.
_FIELDS: dict[str, tuple[str, str, type]] = {
    "llm.provider": ("llm", "provider", str),
    "llm.model": ("llm", "model", str),
    "llm.temperature": ("llm", "temperature", float),
    "llm.top_p": ("llm", "top_p", float),
    "llm.max_tokens": ("llm", "max_tokens", int),
    "retriever.type": ("retriever", "type", str),
    "retriever.top_k": ("retriever", "top_k", int),
    "retriever.weights.bm25": ("retriever", "w_bm25", float),
    "retriever.weights.vector": ("retriever", "w_vector", float),
    "ingestion.chunk_size_tokens": ("ingestion", "chunk_size_tokens", int),
    "ingestion.overlap_tokens": ("ingestion", "overlap_tokens", int),
    "ingestion.embedding_provider": ("ingestion", "embedding_provider", str),
    "ingestion.embedding_dim": ("ingestion", "embedding_dim", int),
    "prompt.prompt_type": ("prompt", "prompt_type", str),
    "prompt.persona": ("prompt", "persona", str),
    "evaluation.faithfulness_threshold": ("evaluation", "faithfulness_threshold", float),
    "evaluation.relevancy_threshold": ("evaluation", "relevancy_threshold", float),
    "evaluation.judge_model": ("evaluation", "judge_model", str),
    "evaluation.seed": ("evaluation", "seed", int),
    "routing.force_rag": ("routing", "force_rag", bool),
}


def _coerce(key: str, value: Any, target: type) -> Any:
    """Coerce strings from CLI/env into the field's type."""
    if value is None:
        if key == "prompt.persona":
            return None
        raise ConfigError(f"config key '{key}': value may not be null")
    if key == "prompt.persona" and isinstance(value, str) and value.strip().lower() in ("", "none", "null"):
        return None
    if target is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
        raise ConfigError(f"config key '{key}': expected boolean, got {value!r}")
    if target is int:
        if isinstance(value, bool) or (not isinstance(value, (int, str))):
            raise ConfigError(f"config key '{key}': expected integer, got {value!r}")
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"config key '{key}': expected integer, got {value!r}") from None
    if target is float:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"config key '{key}': expected number, got {value!r}")
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"config key '{key}': expected number, got {value!r}") from None
    if target is str:
        if isinstance(value, str):
            return value
        raise ConfigError(f"config key '{key}': expected string, got {value!r}")
    raise ConfigError(f"config key '{key}': unsupported target type {target!r}")


def _validate(cfg: PipelineConfig) -> PipelineConfig:
    """Check every invariant; normalize fusion weights to sum to 1."""
    llm, ret, ing, pr, ev = cfg.llm, cfg.retriever, cfg.ingestion, cfg.prompt, cfg.evaluation
    if not 0.0 <= llm.temperature <= 2.0:
        raise ConfigError(f"config key 'llm.temperature': must be in [0, 2], got {llm.temperature}")
    if not 0.0 < llm.top_p <= 1.0:
        raise ConfigError(f"config key 'llm.top_p': must be in (0, 1], got {llm.top_p}")
    if llm.max_tokens < 1:
        raise ConfigError(f"config key 'llm.max_tokens': must be >= 1, got {llm.max_tokens}")
    if ret.type not in RETRIEVER_TYPES:
        raise ConfigError(
            f"config key 'retriever.type': must be one of {RETRIEVER_TYPES}, got {ret.type!r}"
        )
    if ret.top_k < 1:
        raise ConfigError(f"config key 'retriever.top_k': must be >= 1, got {ret.top_k}")
    if ret.w_bm25 < 0 or ret.w_vector < 0:
        raise ConfigError(
            "config key 'retriever.weights': weights must be >= 0, "
            f"got bm25={ret.w_bm25}, vector={ret.w_vector}"
        )
    total = ret.w_bm25 + ret.w_vector
    if total <= 0:
        raise ConfigError("config key 'retriever.weights': bm25 + vector must be > 0")
    if total != 1.0:
        ret = replace(ret, w_bm25=ret.w_bm25 / total, w_vector=ret.w_vector / total)
    if ing.chunk_size_tokens < 1:
        raise ConfigError(
            f"config key 'ingestion.chunk_size_tokens': must be >= 1, got {ing.chunk_size_tokens}"
        )
    if ing.overlap_tokens < 0:
        raise ConfigError(
            f"config key 'ingestion.overlap_tokens': must be >= 0, got {ing.overlap_tokens}"
        )
    if ing.overlap_tokens >= ing.chunk_size_tokens:
        raise ConfigError(
            "config key 'ingestion.overlap_tokens': must be < chunk_size_tokens "
            f"({ing.overlap_tokens} >= {ing.chunk_size_tokens})"
        )
    if ing.embedding_dim < 1:
        raise ConfigError(
            f"config key 'ingestion.embedding_dim': must be >= 1, got {ing.embedding_dim}"
        )
    if pr.prompt_type not in PROMPT_TYPES:
        raise ConfigError(
            f"config key 'prompt.prompt_type': must be one of {PROMPT_TYPES}, got {pr.prompt_type!r}"
        )
    if pr.prompt_type == "persona" and not pr.persona:
        raise ConfigError("config key 'prompt.persona': required when prompt_type is 'persona'")
    for name, val in (
        ("evaluation.faithfulness_threshold", ev.faithfulness_threshold),
        ("evaluation.relevancy_threshold", ev.relevancy_threshold),
    ):
        if not 0.0 <= val <= 1.0:
            raise ConfigError(f"config key '{name}': must be in [0, 1], got {val}")
    return replace(cfg, llm=llm, retriever=ret, ingestion=ing, prompt=pr, evaluation=ev)


def _flatten(tree: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, f"{path}."))
        else:
            flat[path] = value
    return flat


def _build(flat: Mapping[str, Any]) -> PipelineConfig:
    sections: dict[str, dict[str, Any]] = {}
    for key, value in flat.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key '{key}'")
        section, attr, target = _FIELDS[key]
        coerced = _coerce(key, value, target)
        sections.setdefault(section, {})[attr] = coerced
    return _validate(
        PipelineConfig(
            llm=LlmConfig(**sections.get("llm", {})),
            retriever=RetrieverConfig(**sections.get("retriever", {})),
            ingestion=ChunkParams(**sections.get("ingestion", {})),
            prompt=PromptConfig(**sections.get("prompt", {})),
            evaluation=EvalConfig(**sections.get("evaluation", {})),
            routing=RoutingConfig(**sections.get("routing", {})),
        )
    )


def load_config(source: str) -> PipelineConfig:
    """Parse a YAML document into a validated config, defaults filled in.

    An empty document yields the documented defaults. Raises ConfigError
    naming the offending key on any unknown key or constraint violation.
    """
    try:
        tree = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config document: {exc}") from exc
    if tree is None:
        tree = {}
    if not isinstance(tree, Mapping):
        raise ConfigError(f"config document must be a mapping, got {type(tree).__name__}")
    return _build(_flatten(tree))


def load_config_file(path: str) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())


def apply_overrides(base: PipelineConfig, overrides: Mapping[str, Any]) -> PipelineConfig:
    """Return a new config with dotted-path overrides applied, re-validated.

    Last write wins; the base is never mutated. Unknown keys, type
    mismatches, and constraint violations raise ConfigError.
    """
    flat = _flatten(to_dict(base))
    for key, value in overrides.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key '{key}'")
        flat[key] = value
    return _build(flat)


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    """Collect FINRAG_* env vars as an override set (`__` separates path parts)."""
    environ = os.environ if environ is None else environ
    found: dict[str, str] = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        tail = name[len(ENV_PREFIX):]
        if tail.startswith(("LLM_API_KEY", "EMBED_API_KEY")):
            continue  # credentials, not config fields
        key = tail.lower().replace("__", ".")
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key '{key}' (from env var {name})")
        found[key] = value
    return found


def to_dict(cfg: PipelineConfig) -> dict[str, Any]:
    """Nested dict mirror of the config, matching the external YAML key tree."""
    return {
        "llm": {
            "provider": cfg.llm.provider,
            "model": cfg.llm.model,
            "temperature": cfg.llm.temperature,
            "top_p": cfg.llm.top_p,
            "max_tokens": cfg.llm.max_tokens,
        },
        "retriever": {
            "type": cfg.retriever.type,
            "top_k": cfg.retriever.top_k,
            "weights": {"bm25": cfg.retriever.w_bm25, "vector": cfg.retriever.w_vector},
        },
        "ingestion": {
            "chunk_size_tokens": cfg.ingestion.chunk_size_tokens,
            "overlap_tokens": cfg.ingestion.overlap_tokens,
            "embedding_provider": cfg.ingestion.embedding_provider,
            "embedding_dim": cfg.ingestion.embedding_dim,
        },
        "prompt": {"prompt_type": cfg.prompt.prompt_type, "persona": cfg.prompt.persona},
        "evaluation": {
            "faithfulness_threshold": cfg.evaluation.faithfulness_threshold,
            "relevancy_threshold": cfg.evaluation.relevancy_threshold,
            "judge_model": cfg.evaluation.judge_model,
            "seed": cfg.evaluation.seed,
        },
        "routing": {"force_rag": cfg.routing.force_rag},
    }


def serialize(cfg: PipelineConfig) -> str:
    """YAML text such that load_config(serialize(cfg)) == cfg."""
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)


def fingerprint(cfg: PipelineConfig) -> str:
    import hashlib

    return hashlib.sha256(serialize(cfg).encode("utf-8")).hexdigest()[:16]
