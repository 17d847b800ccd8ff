"""NIfTI-1 single-file (``n+1``) and header/image pair (``ni1``) volumes.

Only the parts of the format needed to get a 3D voxel grid and its spacing
are interpreted.  Orientation fields (qform/sform) are parsed and kept on
the header but never applied: slices are taken in stored index order.
"""
import enum
import gzip
import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, NiftiFormatError, TruncatedDataError, UnsupportedDatatypeError

HEADER_SIZE = 348
SINGLE_FILE_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

# (name, struct code) in file order; 348 bytes in total.
_FIELDS = [
    ("sizeof_hdr", "i"),
    ("data_type", "10s"),
    ("db_name", "18s"),
    ("extents", "i"),
    ("session_error", "h"),
    ("regular", "c"),
    ("dim_info", "B"),
    ("dim", "8h"),
    ("intent_p", "3f"),
    ("intent_code", "h"),
    ("datatype", "h"),
    ("bitpix", "h"),
    ("slice_start", "h"),
    ("pixdim", "8f"),
    ("vox_offset", "f"),
    ("scl_slope", "f"),
    ("scl_inter", "f"),
    ("slice_end", "h"),
    ("slice_code", "B"),
    ("xyzt_units", "B"),
    ("cal_max", "f"),
    ("cal_min", "f"),
    ("slice_duration", "f"),
    ("toffset", "f"),
    ("glmax", "i"),
    ("glmin", "i"),
    ("descrip", "80s"),
    ("aux_file", "24s"),
    ("qform_code", "h"),
    ("sform_code", "h"),
    ("quatern", "3f"),
    ("qoffset", "3f"),
    ("srow_x", "4f"),
    ("srow_y", "4f"),
    ("srow_z", "4f"),
    ("intent_name", "16s"),
    ("magic", "4s"),
]
_FORMAT = "".join(code for _, code in _FIELDS)
assert struct.calcsize("<" + _FORMAT) == HEADER_SIZE

# datatype code -> (numpy dtype without byte order, bitpix)
DATATYPES = {
    2: ("u1", 8),
    4: ("i2", 16),
    8: ("i4", 32),
    16: ("f4", 32),
    64: ("f8", 64),
}


class Plane(str, enum.Enum):
    SAGITTAL = "sagittal"
    CORONAL = "coronal"
    AXIAL = "axial"


# axis of the stored (X, Y, Z) grid held fixed by each plane
PLANE_AXIS = {Plane.SAGITTAL: 0, Plane.CORONAL: 1, Plane.AXIAL: 2}


@dataclass(frozen=True)
class NiftiHeader:
    dim: tuple
    datatype_code: int
    bitpix: int
    pixdim: tuple = (1.0,) * 8
    vox_offset: float = float(SINGLE_FILE_OFFSET)
    scl_slope: float = 1.0
    scl_inter: float = 0.0
    magic: bytes = MAGIC_SINGLE
    sizeof_hdr: int = HEADER_SIZE
    endianness: str = "<"
    qform_code: int = 0
    sform_code: int = 0
    quatern: tuple = (0.0, 0.0, 0.0)
    qoffset: tuple = (0.0, 0.0, 0.0)
    srow: tuple = ((0.0,) * 4,) * 3
    descrip: bytes = b""
    xyzt_units: int = 0

    @property
    def rank(self):
        return self.dim[0]

    @property
    def shape(self):
        return tuple(self.dim[1:1 + self.rank])


@dataclass
class NiftiVolume:
    """A parsed header plus a float64 voxel grid of shape (X, Y, Z)."""

    header: NiftiHeader
    voxels: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.voxels = np.ascontiguousarray(self.voxels, dtype=np.float64)
        if self.voxels.ndim != 3:
            raise DataError(f"volume must be 3D, got shape {self.voxels.shape}")
        if not np.all(np.isfinite(self.voxels)):
            raise DataError("volume contains non-finite voxel values")

    @classmethod
    def from_array(cls, voxels, spacing=(1.0, 1.0, 1.0)):
        voxels = np.asarray(voxels, dtype=np.float64)
        dim = (3, *voxels.shape, 1, 1, 1, 1)
        pixdim = (1.0, *map(float, spacing), 1.0, 1.0, 1.0, 1.0)
        return cls(NiftiHeader(dim=dim, datatype_code=64, bitpix=64, pixdim=pixdim), voxels)

    @property
    def shape(self):
        return self.voxels.shape

    @property
    def spacing(self):
        return tuple(self.header.pixdim[1:4])


def _detect_endianness(buf):
    for order in ("<", ">"):
        (size,) = struct.unpack_from(order + "i", buf, 0)
        if size == HEADER_SIZE:
            return order
        if size == 540:
            raise NiftiFormatError("NIfTI-2 files are not supported (sizeof_hdr = 540)")
    raise NiftiFormatError("not a NIfTI-1 header: sizeof_hdr is not 348 in either byte order")


def read_header(buf):
    """Parse the 348-byte header, honouring whichever byte order makes sizeof_hdr 348."""
    if len(buf) < HEADER_SIZE:
        raise TruncatedDataError(HEADER_SIZE, len(buf))
    order = _detect_endianness(buf)
    values = struct.unpack_from(order + _FORMAT, buf, 0)
    raw = {}
    pos = 0
    for name, code in _FIELDS:
        count = int(code[:-1]) if code[:-1].isdigit() and code[-1] != "s" else 1
        raw[name] = values[pos] if count == 1 else values[pos:pos + count]
        pos += count

    magic = raw["magic"]
    if magic not in (MAGIC_SINGLE, MAGIC_PAIR):
        raise NiftiFormatError(f"bad NIfTI-1 magic {magic!r}")
    dim = tuple(int(d) for d in raw["dim"])
    if not 1 <= dim[0] <= 7:
        raise NiftiFormatError(f"dim[0] must be in 1..7, got {dim[0]}")
    if any(d < 1 for d in dim[1:1 + dim[0]]):
        raise NiftiFormatError(f"non-positive dimension in {dim[1:1 + dim[0]]}")
    code = int(raw["datatype"])
    if code not in DATATYPES:
        raise UnsupportedDatatypeError(code)
    bitpix = int(raw["bitpix"])
    if bitpix != DATATYPES[code][1]:
        raise NiftiFormatError(f"bitpix {bitpix} inconsistent with datatype {code}")

    return NiftiHeader(
        dim=dim,
        datatype_code=code,
        bitpix=bitpix,
        pixdim=tuple(float(p) for p in raw["pixdim"]),
        vox_offset=float(raw["vox_offset"]),
        scl_slope=float(raw["scl_slope"]),
        scl_inter=float(raw["scl_inter"]),
        magic=magic,
        sizeof_hdr=int(raw["sizeof_hdr"]),
        endianness=order,
        qform_code=int(raw["qform_code"]),
        sform_code=int(raw["sform_code"]),
        quatern=tuple(raw["quatern"]),
        qoffset=tuple(raw["qoffset"]),
        srow=(tuple(raw["srow_x"]), tuple(raw["srow_y"]), tuple(raw["srow_z"])),
        descrip=raw["descrip"].rstrip(b"\x00"),
        xyzt_units=int(raw["xyzt_units"]),
    )


def read_nifti(buf, image_buf=None):
    """Decode a NIfTI-1 file into a :class:`NiftiVolume`.

    Parameters
    ----------
    buf : bytes
        Whole ``.nii`` file, or the ``.hdr`` of a header/image pair.
    image_buf : bytes, optional
        The ``.img`` contents when ``buf`` is a pair header.

    Voxels are scaled by ``scl_slope``/``scl_inter`` (slope 0 is read as 1).
    Volumes with more than three dimensions keep only their first 3D frame.
    """
    buf = bytes(buf)
    header = read_header(buf)
    if header.magic == MAGIC_SINGLE:
        if len(buf) < SINGLE_FILE_OFFSET:
            raise TruncatedDataError(SINGLE_FILE_OFFSET, len(buf))
        data, offset = buf, int(header.vox_offset)
    else:
        if image_buf is None:
            raise NiftiFormatError("'ni1' header needs the matching .img data")
        data, offset = bytes(image_buf), int(header.vox_offset)

    full_shape = header.shape
    if len(full_shape) > 3:
        warnings.warn(
            f"{len(full_shape)}D volume {full_shape}: using only the first 3D frame",
            stacklevel=2,
        )
    shape = (tuple(full_shape[:3]) + (1, 1))[:3]
    count = int(np.prod(shape))
    dtype = np.dtype(header.endianness + DATATYPES[header.datatype_code][0])
    expected = count * dtype.itemsize
    available = len(data) - offset
    if available < expected:
        raise TruncatedDataError(expected, max(available, 0))
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    voxels = raw.astype(np.float64).reshape(shape, order="F")

    slope = header.scl_slope
    inter = header.scl_inter
    if slope == 0 or not np.isfinite(slope):
        slope = 1.0
    if not np.isfinite(inter):
        inter = 0.0
    if slope != 1.0 or inter != 0.0:
        voxels = voxels * slope + inter
    return NiftiVolume(header, voxels)


def write_nifti(volume):
    """Encode as little-endian single-file NIfTI-1 with float64 voxels at offset 352."""
    h = volume.header
    shape = volume.voxels.shape
    dim = (3, *shape, 1, 1, 1, 1)
    pixdim = tuple(h.pixdim) if len(h.pixdim) == 8 else (1.0,) * 8
    values = dict(
        sizeof_hdr=HEADER_SIZE,
        data_type=b"",
        db_name=b"",
        extents=0,
        session_error=0,
        regular=b"r",
        dim_info=0,
        dim=dim,
        intent_p=(0.0, 0.0, 0.0),
        intent_code=0,
        datatype=64,
        bitpix=64,
        slice_start=0,
        pixdim=pixdim,
        vox_offset=float(SINGLE_FILE_OFFSET),
        scl_slope=1.0,
        scl_inter=0.0,
        slice_end=0,
        slice_code=0,
        xyzt_units=h.xyzt_units,
        cal_max=0.0,
        cal_min=0.0,
        slice_duration=0.0,
        toffset=0.0,
        glmax=0,
        glmin=0,
        descrip=h.descrip[:80],
        aux_file=b"",
        qform_code=h.qform_code,
        sform_code=h.sform_code,
        quatern=h.quatern,
        qoffset=h.qoffset,
        srow_x=h.srow[0],
        srow_y=h.srow[1],
        srow_z=h.srow[2],
        intent_name=b"",
        magic=MAGIC_SINGLE,
    )
    flat = []
    for name, code in _FIELDS:
        v = values[name]
        if isinstance(v, tuple):
            flat.extend(v)
        else:
            flat.append(v)
    header = struct.pack("<" + _FORMAT, *flat)
    extension = b"\x00\x00\x00\x00"
    data = np.asarray(volume.voxels, dtype="<f8").tobytes(order="F")
    return header + extension + data


def extract_plane(volume, plane, index):
    """Copy one 2D slice out of the stored grid.

    sagittal fixes X (returns Y x Z), coronal fixes Y (X x Z), axial fixes Z (X x Y).
    """
    plane = Plane(plane)
    axis = PLANE_AXIS[plane]
    extent = volume.voxels.shape[axis]
    if not 0 <= index < extent:
        raise IndexError(f"{plane.value} index {index} outside 0..{extent - 1}")
    return np.take(volume.voxels, index, axis=axis).copy()


def plane_extent(volume, plane):
    return volume.voxels.shape[PLANE_AXIS[Plane(plane)]]


def load(path):
    """Read a ``.nii``, ``.nii.gz`` or ``.hdr``/``.img`` pair from disk."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix == ".gz":
        data = gzip.decompress(data)
    if path.suffix == ".hdr":
        return read_nifti(data, path.with_suffix(".img").read_bytes())
    return read_nifti(data)


def save(path, volume):
    Path(path).write_bytes(write_nifti(volume))


def with_voxels(volume, voxels):
    """Same header metadata, new voxel grid."""
    voxels = np.asarray(voxels, dtype=np.float64)
    dim = (3, *voxels.shape, *volume.header.dim[4:])
    return NiftiVolume(replace(volume.header, dim=dim), voxels)
