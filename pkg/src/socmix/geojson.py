"""GeoJSON export: one square polygon per labeled cell.

Features carry the cell id, its 1-based component, the land price, and the
maximum responsibility (how confidently the cell is assigned).  Polygons are
axis-aligned squares centered on the cell centroids, exterior rings wound
counterclockwise, so a grid of cells tiles the plane without overlap.
"""

from __future__ import annotations

import json
from typing import Mapping

from ._tableio import atomic_write_text
from .grid import GridCell, StudyArea


def square_ring(cx: float, cy: float, size: float) -> list[list[float]]:
    h = size / 2.0
    return [
        [cx - h, cy - h],
        [cx + h, cy - h],
        [cx + h, cy + h],
        [cx - h, cy + h],
        [cx - h, cy - h],
    ]


def cell_feature(cell: GridCell, size: float, properties: Mapping) -> dict:
    return {
        "type": "Feature",
        "geometry": {
            "type": "Polygon",
            "coordinates": [square_ring(cell.centroid_x, cell.centroid_y, size)],
        },
        "properties": dict(properties),
    }


def cells_geojson(area: StudyArea, assignments: Mapping[str, tuple[int, float]],
                  metadata: Mapping | None = None) -> dict:
    """FeatureCollection of the labeled cells of an area.

    ``assignments`` maps cell id to ``(component, max_responsibility)`` with
    0-based components; the written property is 1-based.
    """
    features = []
    for cell in area.cells:
        if cell.id not in assignments:
            continue
        component, max_resp = assignments[cell.id]
        features.append(
            cell_feature(
                cell,
                area.cell_size_m,
                {
                    "cell_id": cell.id,
                    "component": int(component) + 1,
                    "land_price": cell.land_price,
                    "max_responsibility": float(max_resp),
                },
            )
        )
    collection = {"type": "FeatureCollection", "features": features}
    if metadata:
        collection = {"type": "FeatureCollection", "metadata": dict(metadata), "features": features}
    return collection


def write_geojson(path, collection: dict) -> None:
    atomic_write_text(path, json.dumps(collection, indent=2) + "\n")
