"""NIfTI-1 files built byte by byte, independently of the package reader."""
import numpy as np

# Independent description of the header, written from the public NIfTI-1
# layout as a numpy record type; used to build fixtures byte by byte.
HDR_DTYPE = [
    ("sizeof_hdr", "i4"), ("data_type", "S10"), ("db_name", "S18"), ("extents", "i4"),
    ("session_error", "i2"), ("regular", "S1"), ("dim_info", "u1"), ("dim", "i2", (8,)),
    ("intent_p1", "f4"), ("intent_p2", "f4"), ("intent_p3", "f4"), ("intent_code", "i2"),
    ("datatype", "i2"), ("bitpix", "i2"), ("slice_start", "i2"), ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"), ("scl_slope", "f4"), ("scl_inter", "f4"), ("slice_end", "i2"),
    ("slice_code", "u1"), ("xyzt_units", "u1"), ("cal_max", "f4"), ("cal_min", "f4"),
    ("slice_duration", "f4"), ("toffset", "f4"), ("glmax", "i4"), ("glmin", "i4"),
    ("descrip", "S80"), ("aux_file", "S24"), ("qform_code", "i2"), ("sform_code", "i2"),
    ("quatern_b", "f4"), ("quatern_c", "f4"), ("quatern_d", "f4"),
    ("qoffset_x", "f4"), ("qoffset_y", "f4"), ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)), ("srow_y", "f4", (4,)), ("srow_z", "f4", (4,)),
    ("intent_name", "S16"), ("magic", "S4"),
]


def make_header(order, shape, datatype, bitpix, slope=1.0, inter=0.0, magic=b"n+1"):
    dt = np.dtype(HDR_DTYPE).newbyteorder(order)
    assert dt.itemsize == 348
    h = np.zeros((), dtype=dt)
    h["sizeof_hdr"] = 348
    h["dim"] = [len(shape), *shape] + [1] * (7 - len(shape))
    h["datatype"] = datatype
    h["bitpix"] = bitpix
    h["pixdim"] = [1.0, 1.0, 1.0, 1.2, 1.0, 1.0, 1.0, 1.0]
    h["vox_offset"] = 352.0
    h["scl_slope"] = slope
    h["scl_inter"] = inter
    h["magic"] = magic
    return h.tobytes()


def make_file(order, voxels, datatype=64, dtype="f8", bitpix=64, **kw):
    voxels = np.asarray(voxels)
    data = voxels.astype(np.dtype(dtype).newbyteorder(order)).tobytes(order="F")
    return make_header(order, voxels.shape, datatype, bitpix, **kw) + b"\0\0\0\0" + data
