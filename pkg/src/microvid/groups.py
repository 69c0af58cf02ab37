"""Feature-group identities and their fixed dimensions."""

from __future__ import annotations

from enum import Enum


class Group(str, Enum):
    SCENE_CONTENT = "SceneContent"
    FILMMAKING = "Filmmaking"
    COMPOSITION = "Composition"
    VISUAL_AFFECT = "VisualAffect"
    AUDIO_AFFECT = "AudioAffect"
    VISUAL_NOVELTY = "VisualNovelty"
    AUDIO_NOVELTY = "AudioNovelty"

    def __str__(self) -> str:
        return self.value


ALL_GROUPS = tuple(Group)
FRAME_LEVEL = frozenset({Group.SCENE_CONTENT, Group.COMPOSITION, Group.VISUAL_AFFECT})
# attribute spaces clustered for novelty, visual ones in concatenation order
VISUAL_ATTRIBUTES = (Group.SCENE_CONTENT, Group.FILMMAKING, Group.COMPOSITION, Group.VISUAL_AFFECT)
ATTRIBUTE_GROUPS = (*VISUAL_ATTRIBUTES, Group.AUDIO_AFFECT)
NOVELTY_GROUPS = (Group.VISUAL_NOVELTY, Group.AUDIO_NOVELTY)

SENSORY = (Group.SCENE_CONTENT, Group.FILMMAKING, Group.COMPOSITION)
EMOTIONAL = (Group.VISUAL_AFFECT, Group.AUDIO_AFFECT)
AESTHETIC_VALUE = (*SENSORY, *EMOTIONAL)

_DIMS = {
    Group.SCENE_CONTENT: 462,
    Group.FILMMAKING: 6,
    Group.COMPOSITION: 17,
    Group.VISUAL_AFFECT: 25,
    Group.AUDIO_AFFECT: 6,
    Group.VISUAL_NOVELTY: 40,
    Group.AUDIO_NOVELTY: 10,
}


def group_dim(group: Group, extended_affect: bool = False) -> int:
    if group is Group.VISUAL_AFFECT and extended_affect:
        return 27
    return _DIMS[Group(group)]


def parse_groups(spec: str | None) -> tuple[Group, ...]:
    """Comma-separated group names (case-insensitive); ``None`` or ``all`` selects every group."""
    if spec is None or spec.strip().lower() == "all":
        return ALL_GROUPS
    lookup = {g.value.lower(): g for g in Group}
    out = []
    for name in spec.split(","):
        key = name.strip().lower()
        if not key:
            continue
        if key not in lookup:
            raise ValueError(f"unknown feature group {name.strip()!r}; choose from {', '.join(g.value for g in Group)}")
        if lookup[key] not in out:
            out.append(lookup[key])
    return tuple(out)
