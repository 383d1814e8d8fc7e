#include "aef/manifest.hpp"

#include "aef/log.hpp"
#include "aef/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace aef {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string to_string(Label l) { return l == Label::real ? "real" : "fake"; }

std::optional<Label> label_from_string(const std::string& s) {
  if (s == "real") return Label::real;
  if (s == "fake") return Label::fake;
  return std::nullopt;
}

const ImageRecord* DatasetManifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

size_t DatasetManifest::count_label(Label l) const {
  return static_cast<size_t>(
      std::count_if(records.begin(), records.end(),
                    [&](const ImageRecord& r) { return r.label == l; }));
}

DatasetManifest ingest_directory(const fs::path& root, Label label,
                                 const std::string& source_tag) {
  if (!fs::is_directory(root))
    throw UserError(cat("not a readable directory: ", root.string()));

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && has_image_extension(e.path()))
      files.push_back(fs::relative(e.path(), root));
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.generic_string() < b.generic_string();
            });

  DatasetManifest m;
  m.root = root;
  m.meta["source_tag"] = source_tag;
  for (const auto& rel : files) {
    const fs::path abs = root / rel;
    auto fmt = sniff_container(abs);
    cv::Mat img = fmt ? load_image(abs) : cv::Mat();
    if (img.empty()) {
      warn(cat("skipping undecodable image: ", abs.string()));
      continue;
    }
    ImageRecord r;
    r.id = rel.generic_string();
    r.path = rel.generic_string();
    r.width_px = img.cols;
    r.height_px = img.rows;
    r.container_format = *fmt;
    r.label = label;
    r.source_tag = source_tag;
    r.content_hash = sha256_file(abs);
    m.records.push_back(std::move(r));
  }
  return m;
}

// Pair groups: a real record plus all fakes whose pair_id points at it.
// Unlinked records are singleton groups.
static std::vector<std::vector<size_t>> pair_groups(const DatasetManifest& m) {
  std::map<std::string, size_t> group_of_real;
  std::vector<std::vector<size_t>> groups;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    if (r.label == Label::real) {
      group_of_real[r.id] = groups.size();
      groups.push_back({i});
    }
  }
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    if (r.label == Label::real) continue;
    auto it = r.pair_id ? group_of_real.find(*r.pair_id) : group_of_real.end();
    if (it != group_of_real.end()) {
      groups[it->second].push_back(i);
    } else {
      groups.push_back({i});
    }
  }
  return groups;
}

static std::vector<DatasetManifest> split_records(
    const DatasetManifest& m, const std::vector<size_t>& indices,
    const std::vector<double>& fractions, uint64_t seed) {
  DatasetManifest scoped;
  scoped.root = m.root;
  for (size_t i : indices) scoped.records.push_back(m.records[i]);

  auto groups = pair_groups(scoped);
  Rng rng(seed);
  rng = rng.derive("split");
  rng.shuffle(groups);

  const size_t n = scoped.records.size();
  const size_t k = fractions.size();

  // Largest-remainder apportionment of record counts.
  std::vector<size_t> quota(k, 0);
  std::vector<std::pair<double, size_t>> rema;
  size_t assigned = 0;
  for (size_t s = 0; s < k; ++s) {
    double exact = fractions[s] * static_cast<double>(n);
    quota[s] = static_cast<size_t>(exact);
    assigned += quota[s];
    rema.push_back({exact - static_cast<double>(quota[s]), s});
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 0; assigned < n; ++i, ++assigned) quota[rema[i % k].second]++;

  std::vector<DatasetManifest> out(k);
  for (size_t s = 0; s < k; ++s) {
    out[s].root = m.root;
    out[s].meta = m.meta;
    out[s].meta["split_seed"] = std::to_string(seed);
    out[s].meta["split_index"] = std::to_string(s);
  }

  // Groups are indivisible, so a split may overshoot its quota by at most
  // group_size - 1; later splits absorb the difference.
  size_t split = 0, filled = 0;
  for (const auto& g : groups) {
    while (split + 1 < k && filled >= quota[split]) {
      ++split;
      filled = 0;
    }
    for (size_t i : g) out[split].records.push_back(scoped.records[i]);
    filled += g.size();
  }
  // Restore the canonical path order inside each split.
  for (auto& s : out) {
    std::sort(s.records.begin(), s.records.end(),
              [](const ImageRecord& a, const ImageRecord& b) {
                return a.path < b.path;
              });
  }
  return out;
}

std::vector<DatasetManifest> split_manifest(const DatasetManifest& m,
                                            const std::vector<double>& fractions,
                                            uint64_t seed,
                                            bool stratify_by_source) {
  if (fractions.empty()) throw UserError("split: no fractions given");
  double sum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw UserError("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw UserError(cat("split: fractions sum to ", sum, ", expected 1"));

  std::vector<size_t> all(m.records.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;

  if (!stratify_by_source) return split_records(m, all, fractions, seed);

  std::map<std::string, std::vector<size_t>> by_source;
  for (size_t i = 0; i < m.records.size(); ++i)
    by_source[m.records[i].source_tag].push_back(i);

  std::vector<DatasetManifest> out(fractions.size());
  for (size_t s = 0; s < out.size(); ++s) {
    out[s].root = m.root;
    out[s].meta = m.meta;
    out[s].meta["split_seed"] = std::to_string(seed);
    out[s].meta["split_index"] = std::to_string(s);
  }
  uint64_t stratum = 0;
  for (const auto& [tag, idx] : by_source) {
    auto parts = split_records(m, idx, fractions, seed ^ fnv1a64(tag) ^ stratum);
    for (size_t s = 0; s < parts.size(); ++s)
      for (auto& r : parts[s].records) out[s].records.push_back(std::move(r));
    ++stratum;
  }
  for (auto& s : out) {
    std::sort(s.records.begin(), s.records.end(),
              [](const ImageRecord& a, const ImageRecord& b) {
                return a.path < b.path;
              });
  }
  return out;
}

std::vector<ManifestViolation> verify_manifest(const DatasetManifest& m) {
  std::vector<ManifestViolation> out;
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second)
      out.push_back({r.id, "duplicate_id", "record id appears more than once"});
  }

  std::map<std::string, int> real_use_count;
  for (const auto& r : m.records) {
    const fs::path p = m.abs_path(r);
    if (!fs::exists(p)) {
      out.push_back({r.id, "missing_file", p.string()});
      continue;
    }
    const std::string h = sha256_file(p);
    if (h != r.content_hash)
      out.push_back({r.id, "hash_mismatch", cat("expected ", r.content_hash,
                                                ", found ", h)});
    cv::Mat img = load_image(p);
    if (img.empty()) {
      out.push_back({r.id, "dims_mismatch", "file no longer decodable"});
    } else if (img.cols != r.width_px || img.rows != r.height_px) {
      out.push_back({r.id, "dims_mismatch",
                     cat("manifest ", r.width_px, "x", r.height_px, ", disk ",
                         img.cols, "x", img.rows)});
    }
  }

  for (const auto& r : m.records) {
    if (!r.pair_id) continue;
    const ImageRecord* mate = m.find(*r.pair_id);
    if (!mate || mate->label != Label::real) {
      out.push_back({r.id, "broken_pair", cat("pair_id ", *r.pair_id,
                                              " does not resolve to a real record")});
      continue;
    }
    if (++real_use_count[mate->id] > 1)
      out.push_back({r.id, "duplicate_pair",
                     cat("real record ", mate->id, " linked by multiple fakes")});
    if (mate->width_px != r.width_px || mate->height_px != r.height_px)
      out.push_back({r.id, "pair_dims_mismatch",
                     cat("fake ", r.width_px, "x", r.height_px, " vs real ",
                         mate->width_px, "x", mate->height_px)});
  }
  return out;
}

static ordered_json record_to_json(const ImageRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["path"] = r.path;
  j["width_px"] = r.width_px;
  j["height_px"] = r.height_px;
  j["container_format"] = to_string(r.container_format);
  j["label"] = to_string(r.label);
  j["source_tag"] = r.source_tag;
  if (r.pair_id) j["pair_id"] = *r.pair_id;
  j["content_hash"] = r.content_hash;
  return j;
}

static std::string serialize_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  ordered_json head;
  head["type"] = "dataset_manifest";
  head["root"] = m.root.generic_string();
  head["meta"] = ordered_json::object();
  for (const auto& [k, v] : m.meta) head["meta"][k] = v;
  os << head.dump() << "\n";
  for (const auto& r : m.records) os << record_to_json(r).dump() << "\n";
  return os.str();
}

void write_manifest(const DatasetManifest& m, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError(cat("cannot write manifest: ", file.string()));
  out << serialize_manifest(m);
}

DatasetManifest read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw UserError(cat("cannot read manifest: ", file.string()));
  std::string line;
  if (!std::getline(in, line))
    throw UserError(cat("empty manifest file: ", file.string()));
  ordered_json head = ordered_json::parse(line);
  DatasetManifest m;
  m.root = fs::path(head.at("root").get<std::string>());
  for (const auto& [k, v] : head.at("meta").items())
    m.meta[k] = v.get<std::string>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line);
    ImageRecord r;
    r.id = j.at("id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.width_px = j.at("width_px").get<int>();
    r.height_px = j.at("height_px").get<int>();
    auto fmt = container_from_string(j.at("container_format").get<std::string>());
    auto lbl = label_from_string(j.at("label").get<std::string>());
    if (!fmt || !lbl)
      throw UserError(cat("bad record in manifest: ", line));
    r.container_format = *fmt;
    r.label = *lbl;
    r.source_tag = j.at("source_tag").get<std::string>();
    if (j.contains("pair_id")) r.pair_id = j.at("pair_id").get<std::string>();
    r.content_hash = j.at("content_hash").get<std::string>();
    m.records.push_back(std::move(r));
  }
  return m;
}

std::string manifest_digest(const DatasetManifest& m) {
  const std::string s = serialize_manifest(m);
  return sha256_hex(std::vector<uint8_t>(s.begin(), s.end()));
}

}  // namespace aef
