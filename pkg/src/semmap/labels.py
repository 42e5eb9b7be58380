"""The 19 Cityscapes training classes, in canonical train-id order.

Index 0 is road, index 18 is bicycle. The palette is the standard
Cityscapes visualization palette, one RGB triple per class.
"""

N_LABELS = 19

LABEL_NAMES = (
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
)

PALETTE = (
    (128, 64, 128),
    (244, 35, 232),
    (70, 70, 70),
    (102, 102, 156),
    (190, 153, 153),
    (153, 153, 153),
    (250, 170, 30),
    (220, 220, 0),
    (107, 142, 35),
    (152, 251, 152),
    (70, 130, 180),
    (220, 20, 60),
    (255, 0, 0),
    (0, 0, 142),
    (0, 0, 70),
    (0, 60, 100),
    (0, 80, 100),
    (0, 0, 230),
    (119, 11, 32),
)

LABEL_INDEX = {name: i for i, name in enumerate(LABEL_NAMES)}


def label_color(index: int) -> tuple[int, int, int]:
    """RGB palette color for a label index."""
    return PALETTE[index]
