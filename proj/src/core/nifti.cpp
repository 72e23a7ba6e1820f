#include "dynavessel/nifti.hpp"

#include "dynavessel/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dv::nifti {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int32_t kVoxOffset = 352;

template <typename T>
void swap_bytes(T& v) {
  auto* p = reinterpret_cast<unsigned char*>(&v);
  std::reverse(p, p + sizeof(T));
}

void swap_header(Nifti1Header& h) {
  swap_bytes(h.sizeof_hdr);
  swap_bytes(h.extents);
  swap_bytes(h.session_error);
  for (auto& d : h.dim) swap_bytes(d);
  swap_bytes(h.intent_p1);
  swap_bytes(h.intent_p2);
  swap_bytes(h.intent_p3);
  swap_bytes(h.intent_code);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  swap_bytes(h.slice_start);
  for (auto& p : h.pixdim) swap_bytes(p);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
  swap_bytes(h.slice_end);
  swap_bytes(h.cal_max);
  swap_bytes(h.cal_min);
  swap_bytes(h.slice_duration);
  swap_bytes(h.toffset);
  swap_bytes(h.glmax);
  swap_bytes(h.glmin);
  swap_bytes(h.qform_code);
  swap_bytes(h.sform_code);
  swap_bytes(h.quatern_b);
  swap_bytes(h.quatern_c);
  swap_bytes(h.quatern_d);
  swap_bytes(h.qoffset_x);
  swap_bytes(h.qoffset_y);
  swap_bytes(h.qoffset_z);
  for (int i = 0; i < 4; ++i) {
    swap_bytes(h.srow_x[i]);
    swap_bytes(h.srow_y[i]);
    swap_bytes(h.srow_z[i]);
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUInt8: return 1;
    case kInt16: return 2;
    case kUInt16: return 2;
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

struct Parsed {
  Nifti1Header header;
  bool swapped = false;
  HeaderInfo info;
};

VolumeGeometry geometry_from_header(const Nifti1Header& h) {
  std::array<int, 3> dims{h.dim[1], h.dim[2], h.dim[3]};
  for (int d : dims)
    if (d < 1) fail(ErrorCode::Format, "non-positive dimension in header");
  Vec3 spacing;
  Vec3 origin;
  Mat3 direction;
  if (h.sform_code > 0) {
    Mat3 m;
    m << h.srow_x[0], h.srow_x[1], h.srow_x[2], h.srow_y[0], h.srow_y[1], h.srow_y[2],
        h.srow_z[0], h.srow_z[1], h.srow_z[2];
    for (int a = 0; a < 3; ++a) {
      spacing[a] = m.col(a).norm();
      if (!(spacing[a] > 0.0)) fail(ErrorCode::Format, "degenerate sform");
      direction.col(a) = m.col(a) / spacing[a];
    }
    origin << h.srow_x[3], h.srow_y[3], h.srow_z[3];
    // float storage: restore exact orthonormality
    if ((direction.transpose() * direction - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12) {
      Eigen::JacobiSVD<Mat3> svd(direction, Eigen::ComputeFullU | Eigen::ComputeFullV);
      direction = svd.matrixU() * svd.matrixV().transpose();
    }
    // sform columns store spacing in single precision
    for (int a = 0; a < 3; ++a) spacing[a] = static_cast<double>(static_cast<float>(spacing[a]));
  } else if (h.qform_code > 0) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    Mat3 r;
    r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
        2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
        2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
    const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
    r.col(2) *= qfac;
    direction = r;
    spacing << std::abs(h.pixdim[1]), std::abs(h.pixdim[2]), std::abs(h.pixdim[3]);
    origin << h.qoffset_x, h.qoffset_y, h.qoffset_z;
  } else {
    direction.setIdentity();
    spacing << std::abs(h.pixdim[1]), std::abs(h.pixdim[2]), std::abs(h.pixdim[3]);
    for (int a = 0; a < 3; ++a)
      if (!(spacing[a] > 0.0)) spacing[a] = 1.0;
    origin.setZero();
  }
  return VolumeGeometry(dims, spacing, origin, direction);
}

Parsed parse_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(Nifti1Header)) fail(ErrorCode::Format, "file too short for a NIfTI-1 header");
  Parsed p;
  std::memcpy(&p.header, bytes.data(), sizeof(Nifti1Header));
  auto& h = p.header;
  const bool magic_ok = (std::memcmp(h.magic, "n+1\0", 4) == 0) || (std::memcmp(h.magic, "ni1\0", 4) == 0);
  if (!magic_ok) fail(ErrorCode::Format, "bad NIfTI magic");
  if (h.sizeof_hdr != 348) {
    std::int32_t s = h.sizeof_hdr;
    swap_bytes(s);
    if (s != 348) fail(ErrorCode::Format, "bad sizeof_hdr");
    swap_header(h);
    p.swapped = true;
  }
  if (h.dim[0] != 3) {
    // trailing singleton dimensions are tolerated
    bool ok = h.dim[0] > 3 && h.dim[0] <= 7;
    for (int d = 4; ok && d <= h.dim[0]; ++d) ok = h.dim[d] == 1;
    if (!ok) fail(ErrorCode::Dimensionality, "only 3D volumes are supported (dim[0] = " + std::to_string(h.dim[0]) + ")");
  }
  if (bytes_per_voxel(h.datatype) == 0)
    fail(ErrorCode::Unsupported, "unsupported NIfTI datatype code " + std::to_string(h.datatype));
  p.info.datatype = h.datatype;
  p.info.geometry = geometry_from_header(h);
  p.info.scl_slope = h.scl_slope;
  p.info.scl_inter = h.scl_inter;
  p.info.sform_code = h.sform_code;
  p.info.qform_code = h.qform_code;
  return p;
}

template <typename T>
T load(const std::uint8_t* src, bool swapped) {
  T v;
  std::memcpy(&v, src, sizeof(T));
  if (swapped) swap_bytes(v);
  return v;
}

std::vector<float> decode_voxels(const Parsed& p, const std::uint8_t* data, std::size_t available) {
  const std::size_t n = p.info.geometry.voxel_count();
  const int bpv = bytes_per_voxel(p.header.datatype);
  if (available < n * static_cast<std::size_t>(bpv)) fail(ErrorCode::Format, "truncated voxel data");
  double slope = p.header.scl_slope;
  double inter = std::isfinite(p.header.scl_inter) ? p.header.scl_inter : 0.0;
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = data + i * bpv;
    double v = 0.0;
    switch (p.header.datatype) {
      case kUInt8: v = *src; break;
      case kInt16: v = load<std::int16_t>(src, p.swapped); break;
      case kUInt16: v = load<std::uint16_t>(src, p.swapped); break;
      case kFloat32: v = load<float>(src, p.swapped); break;
      case kFloat64: v = load<double>(src, p.swapped); break;
      default: fail(ErrorCode::Unsupported, "unsupported datatype");
    }
    if (slope != 1.0 || inter != 0.0) v = v * slope + inter;
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) fail(ErrorCode::Format, "non-finite voxel value");
    out[i] = f;
  }
  return out;
}

std::filesystem::path image_path_for(const std::filesystem::path& hdr) {
  std::string s = hdr.string();
  for (const char* ext : {".hdr.gz", ".hdr"}) {
    if (ends_with(s, ext)) {
      std::string base = s.substr(0, s.size() - std::strlen(ext));
      for (const char* img : {".img", ".img.gz"}) {
        std::filesystem::path candidate = base + img;
        if (std::filesystem::exists(candidate)) return candidate;
      }
    }
  }
  fail(ErrorCode::Io, "no .img file accompanies " + s);
}

std::vector<float> read_values(const std::filesystem::path& path, Parsed& parsed) {
  const auto bytes = read_file_bytes(path);
  parsed = parse_header(bytes);
  if (std::memcmp(parsed.header.magic, "ni1", 3) == 0) {
    const auto img = read_file_bytes(image_path_for(path));
    const std::size_t off = static_cast<std::size_t>(std::max(0.0f, parsed.header.vox_offset));
    if (off > img.size()) fail(ErrorCode::Format, "vox_offset beyond image file");
    return decode_voxels(parsed, img.data() + off, img.size() - off);
  }
  const std::size_t off = static_cast<std::size_t>(parsed.header.vox_offset);
  if (off < sizeof(Nifti1Header) || off > bytes.size()) fail(ErrorCode::Format, "bad vox_offset");
  return decode_voxels(parsed, bytes.data() + off, bytes.size() - off);
}

Nifti1Header make_header(const VolumeGeometry& g, std::int16_t datatype) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int a = 0; a < 3; ++a) h.dim[a + 1] = static_cast<std::int16_t>(g.dims[a]);
  for (int a = 4; a < 8; ++a) h.dim[a] = 1;
  h.datatype = datatype;
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(datatype));
  Mat3 rot = g.direction;
  double qfac = 1.0;
  if (rot.determinant() < 0) {
    rot.col(2) *= -1.0;
    qfac = -1.0;
  }
  h.pixdim[0] = static_cast<float>(qfac);
  for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(g.spacing[a]);
  for (int a = 4; a < 8; ++a) h.pixdim[a] = 1.0f;
  h.vox_offset = static_cast<float>(kVoxOffset);
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2 | 8;  // mm, s
  std::strncpy(h.descrip, "dynavessel", sizeof(h.descrip));
  h.qform_code = 1;
  h.sform_code = 1;
  Eigen::Quaterniond q(rot);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  h.quatern_b = static_cast<float>(q.x());
  h.quatern_c = static_cast<float>(q.y());
  h.quatern_d = static_cast<float>(q.z());
  h.qoffset_x = static_cast<float>(g.origin[0]);
  h.qoffset_y = static_cast<float>(g.origin[1]);
  h.qoffset_z = static_cast<float>(g.origin[2]);
  const Mat4 a = g.affine();
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(a(0, c));
    h.srow_y[c] = static_cast<float>(a(1, c));
    h.srow_z[c] = static_cast<float>(a(2, c));
  }
  std::memcpy(h.magic, "n+1\0", 4);
  return h;
}

std::vector<std::uint8_t> encode_raw(const VolumeGeometry& g, std::int16_t datatype, const void* data,
                                     std::size_t nbytes, float cal_min, float cal_max) {
  Nifti1Header h = make_header(g, datatype);
  h.cal_min = cal_min;
  h.cal_max = cal_max;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(kVoxOffset) + nbytes, 0);
  std::memcpy(out.data(), &h, sizeof(h));
  // bytes 348..351: zero extension flag
  std::memcpy(out.data() + kVoxOffset, data, nbytes);
  return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::Io, "file not found: " + path.string());
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 20);
  for (;;) {
    const int got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (got < 0) {
      gzclose(f);
      fail(ErrorCode::Format, "corrupt compressed stream in " + path.string());
    }
    if (got == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + got);
  }
  gzclose(f);
  return out;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  if (ends_with(path.string(), ".gz")) {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (!f) fail(ErrorCode::Io, "cannot open for writing: " + path.string());
    std::size_t done = 0;
    while (done < bytes.size()) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
      if (gzwrite(f, bytes.data() + done, chunk) != static_cast<int>(chunk)) {
        gzclose(f);
        fail(ErrorCode::Io, "write failed: " + path.string());
      }
      done += chunk;
    }
    if (gzclose(f) != Z_OK) fail(ErrorCode::Io, "write failed: " + path.string());
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) fail(ErrorCode::Io, "write failed: " + path.string());
}

HeaderInfo read_header(const std::filesystem::path& path) {
  return parse_header(read_file_bytes(path)).info;
}

ScalarVolume read_volume(const std::filesystem::path& path) {
  Parsed parsed;
  auto values = read_values(path, parsed);
  return ScalarVolume(parsed.info.geometry, std::move(values));
}

LabelVolume read_labels(const std::filesystem::path& path) {
  Parsed parsed;
  const auto values = read_values(path, parsed);
  std::vector<std::uint8_t> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if (!(v >= 0.0f && v <= 255.0f) || v != std::floor(v))
      fail(ErrorCode::Format, "label file holds non-integer or out-of-range values: " + path.string());
    data[i] = static_cast<std::uint8_t>(v);
  }
  LabelVolume out(parsed.info.geometry, std::move(data), default_label_names());
  out.ensure_names();
  return out;
}

ScalarVolume decode_scalar(const std::vector<std::uint8_t>& bytes) {
  Parsed p = parse_header(bytes);
  const std::size_t off = static_cast<std::size_t>(p.header.vox_offset);
  if (off < sizeof(Nifti1Header) || off > bytes.size()) fail(ErrorCode::Format, "bad vox_offset");
  return ScalarVolume(p.info.geometry, decode_voxels(p, bytes.data() + off, bytes.size() - off));
}

std::vector<std::uint8_t> encode(const ScalarVolume& vol) {
  return encode_raw(vol.geometry(), kFloat32, vol.data().data(), vol.size() * sizeof(float), 0.0f, 0.0f);
}

std::vector<std::uint8_t> encode(const LabelVolume& vol) {
  return encode_raw(vol.geometry(), kUInt8, vol.data().data(), vol.size(), 0.0f, 0.0f);
}

void write_volume(const ScalarVolume& vol, const std::filesystem::path& path) {
  write_file_bytes(path, encode(vol));
}

void write_volume(const LabelVolume& vol, const std::filesystem::path& path) {
  write_file_bytes(path, encode(vol));
}

}  // namespace dv::nifti
