#pragma once

#include "dynavessel/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dv::nifti {

enum DataType : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kFloat32 = 16,
  kFloat64 = 64,
  kUInt16 = 512,
};

/// Header fields the toolkit cares about, decoded from a NIfTI-1 file.
struct HeaderInfo {
  std::int16_t datatype = 0;
  VolumeGeometry geometry;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int16_t sform_code = 0;
  std::int16_t qform_code = 0;
};

/// Reads a NIfTI-1 volume (.nii, .nii.gz, or .hdr/.img pair) as 32-bit HU.
ScalarVolume read_volume(const std::filesystem::path& path);
/// Reads a NIfTI-1 volume as labels; values must be integers in [0, 255].
LabelVolume read_labels(const std::filesystem::path& path);
HeaderInfo read_header(const std::filesystem::path& path);

/// float32, sform/qform code 1, gzip when the path ends in ".gz".
void write_volume(const ScalarVolume& vol, const std::filesystem::path& path);
/// uint8 datatype.
void write_volume(const LabelVolume& vol, const std::filesystem::path& path);

// In-memory codec (uncompressed single-file layout).
std::vector<std::uint8_t> encode(const ScalarVolume& vol);
std::vector<std::uint8_t> encode(const LabelVolume& vol);
ScalarVolume decode_scalar(const std::vector<std::uint8_t>& bytes);

/// Whole-file read with transparent gzip decompression.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes bytes, gzip-compressing when the path ends in ".gz".
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace dv::nifti
