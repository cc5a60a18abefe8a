#pragma once

#include "koopcert/galerkin.hpp"

#include <cstdint>
#include <string>

namespace koopcert {

/// Writes the system to a directory: one dense little-endian binary file
/// per matrix plus a JSON manifest carrying the space tag, size, basis
/// descriptor and per-file checksums.
void save_system(const std::string& dir, const GalerkinSystem& sys);

/// Loads a directory written by save_system, verifying checksums.
GalerkinSystem load_system(const std::string& dir);

/// FNV-1a 64-bit hash of a byte range (used for manifest checksums).
std::uint64_t fnv1a(const void* data, std::size_t size);

/// JSON descriptors for dictionaries and kernels, used as the basis tag
/// of serialized systems so a dictionary can be re-evaluated on reload.
std::string describe_dictionary(const Dictionary& dict);
Dictionary dictionary_from_descriptor(const std::string& descriptor);
std::string describe_kernel(const KernelSpec& kernel);
KernelSpec kernel_from_descriptor(const std::string& descriptor);

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_binary(const std::string& path);

} // namespace koopcert
