#pragma once

#include "aef/image_io.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aef {

enum class Label { real = 0, fake = 1 };

std::string to_string(Label l);
std::optional<Label> label_from_string(const std::string& s);

struct ImageRecord {
  std::string id;                 // unique within a manifest
  std::string path;               // relative to manifest root
  int width_px = 0;
  int height_px = 0;
  ContainerFormat container_format = ContainerFormat::png;
  Label label = Label::real;
  std::string source_tag;
  std::optional<std::string> pair_id;  // fake -> originating real record
  std::string content_hash;            // sha256 of file bytes
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ImageRecord> records;
  std::map<std::string, std::string> meta;  // ordered => stable serialization

  std::filesystem::path abs_path(const ImageRecord& r) const { return root / r.path; }
  const ImageRecord* find(const std::string& id) const;
  size_t count_label(Label l) const;
};

// One record per decodable image under root, ordered lexicographically by
// path. Undecodable files are skipped with a warning.
DatasetManifest ingest_directory(const std::filesystem::path& root, Label label,
                                 const std::string& source_tag);

// Disjoint cover of the records. Paired records co-travel: a real and every
// fake linked to it land in the same split. With stratify_by_source, each
// source_tag group is split independently and the parts concatenated.
std::vector<DatasetManifest> split_manifest(const DatasetManifest& m,
                                            const std::vector<double>& fractions,
                                            uint64_t seed,
                                            bool stratify_by_source = false);

struct ManifestViolation {
  std::string record_id;
  std::string kind;    // hash_mismatch | dims_mismatch | missing_file |
                       // broken_pair | duplicate_pair | pair_dims_mismatch |
                       // duplicate_id
  std::string detail;
};

// Report-only: checks disk state against the records plus pair-link health.
std::vector<ManifestViolation> verify_manifest(const DatasetManifest& m);

// Line-delimited: a header line with root/meta, then one record per line,
// keys in fixed order.
void write_manifest(const DatasetManifest& m, const std::filesystem::path& file);
DatasetManifest read_manifest(const std::filesystem::path& file);

// Hash of the canonical serialization; used for provenance in checkpoints
// and score sets.
std::string manifest_digest(const DatasetManifest& m);

}  // namespace aef
