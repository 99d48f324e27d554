"""Turn manifest rows into multi-graph samples, with optional feature cache."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING

from loguru import logger
from tqdm import tqdm

from meshgnn.features import FeatureCache, node_features
from meshgnn.graph import Sample, assemble_sample
from meshgnn.mesh import load_off

if TYPE_CHECKING:
    from pathlib import Path

    from meshgnn.config import FeatureConfig
    from meshgnn.mesh import FloatArray, Mesh
    from meshgnn.pipeline.manifest import Manifest


def mesh_features(
    mesh: Mesh, mesh_path: Path, config: FeatureConfig, cache: FeatureCache | None
) -> FloatArray:
    """Node features of one mesh, read from or written to *cache* when given."""
    if cache is not None:
        table = cache.load(mesh_path, config)
        if table is not None and len(table) == mesh.n_vertices:
            return table
    table = node_features(mesh, config.mode, config)
    if cache is not None:
        cache.store(mesh_path, config, table)
    return table


def load_sample(
    manifest: Manifest,
    row: int,
    config: FeatureConfig,
    cache: FeatureCache | None = None,
) -> Sample:
    """Read the meshes of one manifest row and assemble its sample."""
    paths = manifest.mesh_paths(row)
    meshes = [load_off(p) for p in paths]
    tables = [
        mesh_features(m, p, config, cache)
        for m, p in zip(meshes, paths, strict=True)
    ]
    return assemble_sample(
        meshes,
        int(manifest.labels[row]),
        manifest.metadata(row),
        config.mode,
        n_structures=len(paths),
        sample_id=manifest.sample_ids[row],
        config=config,
        features=tables,
    )


def load_samples(
    manifest: Manifest,
    config: FeatureConfig,
    *,
    cache: FeatureCache | None = None,
    threads: int = 1,
    desc: str = "Extracting features",
) -> list[Sample]:
    """Load every row of *manifest*; results keep manifest order."""
    logger.debug(
        f"Загрузка {len(manifest)} образцов ({config.mode}, потоков: {threads})"
    )

    def _load(row: int) -> Sample:
        return load_sample(manifest, row, config, cache)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(
            tqdm(
                pool.map(_load, range(len(manifest))),
                total=len(manifest),
                desc=desc,
                unit="sample",
                leave=False,
            )
        )


def extract_features(
    manifest: Manifest, config: FeatureConfig, cache_dir: Path, *, threads: int = 1
) -> int:
    """Fill the feature cache for every mesh of *manifest*; return mesh count."""
    cache = FeatureCache(cache_dir)
    samples = load_samples(manifest, config, cache=cache, threads=threads)
    n_meshes = sum(s.n_structures for s in samples)
    logger.info(f"Кэш признаков {cache_dir}: {n_meshes} мешей ({config.mode})")
    return n_meshes
