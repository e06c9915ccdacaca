#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsrnet/signal.hpp"
#include "tsrnet/synth.hpp"

namespace tsrnet {

enum class Provenance { ptbxl, synthetic };

struct DatasetSplit {
    std::vector<EcgRecord> train;   // all normal
    std::vector<EcgRecord> test;    // mixed labels
    Provenance provenance = Provenance::synthetic;
    std::uint64_t seed = 0;

    void validate() const {
        for (const auto& r : train)
            if (r.label != Label::normal)
                throw std::logic_error("DatasetSplit: non-normal record '" + r.record_id +
                                       "' in train split");
        bool has_normal = false, has_abnormal = false;
        for (const auto& r : test) {
            has_normal |= r.label == Label::normal;
            has_abnormal |= r.label == Label::abnormal;
        }
        if (!test.empty() && (!has_normal || !has_abnormal))
            throw std::logic_error("DatasetSplit: test split needs both labels");
    }
};

inline DatasetSplit to_split(const SynthDataset& synth) {
    DatasetSplit split;
    split.provenance = Provenance::synthetic;
    split.seed = synth.seed;
    for (const auto& r : synth.train) split.train.push_back(r.record);
    for (const auto& r : synth.test) split.test.push_back(r.record);
    split.validate();
    return split;
}

// ---------------------------------------------------------------------------
// On-disk layout: <dir>/manifest.json plus one .sig file per record holding
// raw little-endian doubles, lead-interleaved ([D x N] row-major).
// ---------------------------------------------------------------------------
namespace dataset_io {

inline void write_record(const std::filesystem::path& path, const EcgRecord& rec) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("dataset: cannot write " + path.string());
    os.write(reinterpret_cast<const char*>(rec.samples.data()),
             static_cast<std::streamsize>(rec.samples.size() * sizeof(double)));
}

inline EcgRecord read_record(const std::filesystem::path& path, int D, int N,
                             double fs, const std::string& id, Label label) {
    EcgRecord rec;
    rec.record_id = id;
    rec.sampling_rate_hz = fs;
    rec.label = label;
    rec.samples = Tensor({D, N});
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("dataset: missing record file " + path.string());
    is.read(reinterpret_cast<char*>(rec.samples.data()),
            static_cast<std::streamsize>(rec.samples.size() * sizeof(double)));
    if (!is) throw std::runtime_error("dataset: truncated record file " + path.string());
    return rec;
}

} // namespace dataset_io

inline void save_dataset(const std::filesystem::path& dir, const DatasetSplit& split,
                         const nlohmann::json& spec_json = nlohmann::json::object()) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["provenance"] = split.provenance == Provenance::ptbxl ? "ptbxl" : "synthetic";
    manifest["seed"] = split.seed;
    manifest["spec"] = spec_json;
    for (const char* part : {"train", "test"}) {
        const auto& records = std::string(part) == "train" ? split.train : split.test;
        nlohmann::json list = nlohmann::json::array();
        for (const auto& rec : records) {
            const std::string file = rec.record_id + ".sig";
            dataset_io::write_record(dir / file, rec);
            list.push_back({{"id", rec.record_id},
                            {"file", file},
                            {"label", label_name(rec.label)},
                            {"samples", rec.num_samples()},
                            {"leads", rec.num_leads()},
                            {"sampling_rate_hz", rec.sampling_rate_hz}});
        }
        manifest[part] = std::move(list);
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) throw std::runtime_error("dataset: cannot write manifest in " + dir.string());
    os << manifest.dump(2) << "\n";
}

inline DatasetSplit load_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw std::runtime_error("dataset: missing manifest in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(is);
    DatasetSplit split;
    split.provenance = manifest.at("provenance") == "ptbxl" ? Provenance::ptbxl : Provenance::synthetic;
    split.seed = manifest.at("seed").get<std::uint64_t>();
    for (const char* part : {"train", "test"}) {
        auto& records = std::string(part) == "train" ? split.train : split.test;
        for (const auto& e : manifest.at(part)) {
            records.push_back(dataset_io::read_record(
                dir / e.at("file").get<std::string>(), e.at("samples").get<int>(),
                e.at("leads").get<int>(), e.at("sampling_rate_hz").get<double>(),
                e.at("id").get<std::string>(), label_from_name(e.at("label").get<std::string>())));
        }
    }
    split.validate();
    return split;
}

} // namespace tsrnet
