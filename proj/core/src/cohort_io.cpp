#include "perfgat/cohort_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "perfgat/container.hpp"
#include "perfgat/errors.hpp"
#include "perfgat/rng.hpp"

namespace perfgat::io {

using nlohmann::json;

namespace {

std::string subject_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subject_%05zu.pgc", index);
  return buf;
}

std::string hex_u64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void write_cohort(const std::filesystem::path& dir,
                  const std::vector<synth::LabeledVolume>& cohort, const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw DataError("write_cohort: cannot create directory '" + dir.string() + "'");
  }

  json manifest;
  manifest["kind"] = "cohort";
  manifest["schema_version"] = kSchemaVersion;
  manifest["n_subjects"] = cohort.size();
  manifest["n_regions"] = cfg.cohort.n_regions;
  manifest["n_timepoints"] = cfg.cohort.n_timepoints;
  manifest["patch_size"] = cfg.cohort.patch_size;
  manifest["config"] = json::parse(cfg.to_json_text());

  json labels = json::array();
  json files = json::array();
  json seeds = json::array();

  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const synth::LabeledVolume& v = cohort[i];
    ArtifactContainer c;
    c.add_matrix("region_series", v.region_series);
    {
      std::vector<double> flat;
      flat.reserve(v.region_centroids.size() * 3);
      for (const Point3& p : v.region_centroids) {
        flat.push_back(p.x);
        flat.push_back(p.y);
        flat.push_back(p.z);
      }
      c.add("region_centroids", {v.region_centroids.size(), 3}, std::move(flat));
    }
    c.add_vector("tumor_series", v.tumor_series);
    c.add("tumor_patch",
          {v.tumor_patch.patch(), v.tumor_patch.patch(), v.tumor_patch.patch(),
           v.tumor_patch.timepoints()},
          {v.tumor_patch.data().begin(), v.tumor_patch.data().end()});
    c.add("tumor_centroid", {3}, {v.tumor_centroid.x, v.tumor_centroid.y, v.tumor_centroid.z});

    json meta;
    meta["kind"] = "subject";
    meta["label"] = v.label;
    meta["subject_index"] = i;
    meta["subject_seed"] = hex_u64(mix_seed(cfg.seed, rng_stream::kSubjectBase + i));
    c.set_meta_json(meta.dump());

    const std::string fname = subject_filename(i);
    c.write_file(dir / fname);
    labels.push_back(v.label);
    files.push_back(fname);
    seeds.push_back(meta["subject_seed"]);
  }

  manifest["labels"] = std::move(labels);
  manifest["files"] = std::move(files);
  manifest["subject_seeds"] = std::move(seeds);

  std::ofstream f(dir / "cohort.json", std::ios::trunc);
  if (!f) throw DataError("write_cohort: cannot write cohort.json");
  f << manifest.dump(2) << "\n";
}

LoadedCohort read_cohort(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "cohort.json";
  std::ifstream f(manifest_path);
  if (!f) {
    throw DataError("read_cohort: missing cohort manifest '" + manifest_path.string() + "'");
  }
  const json manifest = json::parse(f, nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) {
    throw DataError("read_cohort: malformed cohort.json");
  }
  if (manifest.value("schema_version", std::int64_t{-1}) != kSchemaVersion) {
    throw DataError("read_cohort: cohort schema version mismatch");
  }

  LoadedCohort out;
  out.n_regions = manifest.at("n_regions").get<std::size_t>();
  out.n_timepoints = manifest.at("n_timepoints").get<std::size_t>();
  out.patch_size = manifest.at("patch_size").get<std::size_t>();

  const auto& files = manifest.at("files");
  for (std::size_t i = 0; i < files.size(); ++i) {
    const ArtifactContainer c =
        ArtifactContainer::read_file(dir / files[i].get<std::string>());
    const json meta = json::parse(c.meta_json());

    synth::LabeledVolume v;
    v.region_series = c.matrix("region_series");
    const auto& cents = c.array("region_centroids");
    if (cents.shape.size() != 2 || cents.shape[1] != 3) {
      throw DataError("read_cohort: region_centroids must be N x 3");
    }
    for (std::size_t r = 0; r < cents.shape[0]; ++r) {
      v.region_centroids.push_back(
          {cents.data[r * 3], cents.data[r * 3 + 1], cents.data[r * 3 + 2]});
    }
    v.tumor_series = c.vector("tumor_series");
    const auto& patch = c.array("tumor_patch");
    if (patch.shape.size() != 4 || patch.shape[0] != patch.shape[1] ||
        patch.shape[1] != patch.shape[2]) {
      throw DataError("read_cohort: tumor_patch must be p x p x p x T");
    }
    v.tumor_patch = synth::Tensor4(patch.shape[0], patch.shape[3]);
    std::copy(patch.data.begin(), patch.data.end(), v.tumor_patch.data().begin());
    const auto& tc = c.array("tumor_centroid");
    if (tc.data.size() != 3) throw DataError("read_cohort: tumor_centroid must have 3 values");
    v.tumor_centroid = {tc.data[0], tc.data[1], tc.data[2]};
    v.label = meta.at("label").get<int>();

    if (v.region_series.rows() != out.n_regions ||
        v.region_series.cols() != out.n_timepoints) {
      throw DataError("read_cohort: subject " + std::to_string(i) +
                      " disagrees with the cohort dims");
    }
    out.labels.push_back(v.label);
    out.volumes.push_back(std::move(v));
  }
  return out;
}

}  // namespace perfgat::io
