#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsrnet/dataset.hpp"
#include "tsrnet/ptbxl.hpp"
#include "tsrnet/synth.hpp"
#include "tsrnet/wfdb.hpp"

using namespace tsrnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p);
    os << text;
}

// Test-side WFDB writer: format-16 interleaved little-endian samples.
void write_wfdb(const fs::path& dir, const std::string& name, int leads, double fs,
                const std::vector<std::int16_t>& interleaved, double gain, int baseline) {
    const int D = static_cast<int>(interleaved.size()) / leads;
    std::ostringstream hea;
    hea << name << " " << leads << " " << fs << " " << D << "\n";
    for (int n = 0; n < leads; ++n)
        hea << name << ".dat 16 " << gain << "(" << baseline << ")/mV 16 0 0 0 0 lead" << n << "\n";
    write_text(dir / (name + ".hea"), hea.str());

    std::ofstream os(dir / (name + ".dat"), std::ios::binary);
    for (std::int16_t v : interleaved) {
        const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
        os.write(bytes, 2);
    }
}

} // namespace

TEST_CASE("wfdb conversion applies gain and baseline per lead") {
    TempDir tmp("tsrnet_wfdb_basic");
    // two leads, three samples; gain 1000 adu/mV, baseline 100
    write_wfdb(tmp.path, "r1", 2, 100.0,
               {1100, -900, 100, 2100, 600, 100}, 1000.0, 100);
    EcgRecord rec = read_wfdb(tmp.path / "r1.hea");
    CHECK(rec.record_id == "r1");
    CHECK(rec.sampling_rate_hz == 100.0);
    CHECK(rec.num_samples() == 3);
    CHECK(rec.num_leads() == 2);
    CHECK_THAT(rec.samples.at(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(rec.samples.at(0, 1), Catch::Matchers::WithinAbs(-1.0, 1e-12));
    CHECK_THAT(rec.samples.at(1, 0), Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(rec.samples.at(1, 1), Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(rec.samples.at(2, 0), Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(rec.samples.at(2, 1), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("wfdb handles a 12-lead record at scale") {
    TempDir tmp("tsrnet_wfdb_12lead");
    const int D = 1000, N = 12;
    std::vector<std::int16_t> data(static_cast<std::size_t>(D) * N);
    for (int i = 0; i < D; ++i)
        for (int n = 0; n < N; ++n)
            data[static_cast<std::size_t>(i) * N + n] = static_cast<std::int16_t>((i + n) % 500);
    write_wfdb(tmp.path, "big", N, 100.0, data, 1000.0, 0);
    EcgRecord rec = read_wfdb(tmp.path / "big.hea");
    CHECK(rec.num_samples() == 1000);
    CHECK(rec.num_leads() == 12);
    CHECK_THAT(rec.samples.at(7, 3), Catch::Matchers::WithinAbs(10.0 / 1000.0, 1e-12));
}

TEST_CASE("wfdb errors are precise") {
    TempDir tmp("tsrnet_wfdb_errors");
    // truncated data file
    write_wfdb(tmp.path, "trunc", 2, 100.0, {1, 2, 3, 4}, 1000.0, 0);
    write_text(tmp.path / "trunc.hea", "trunc 2 100 10\ntrunc.dat 16 1000(0)/mV\ntrunc.dat 16 1000(0)/mV\n");
    CHECK_THROWS_WITH(read_wfdb(tmp.path / "trunc.hea"),
                      Catch::Matchers::ContainsSubstring("truncated"));

    // unsupported format
    write_text(tmp.path / "fmt.hea", "fmt 1 100 4\nfmt.dat 212 1000(0)/mV\n");
    CHECK_THROWS_WITH(read_wfdb(tmp.path / "fmt.hea"),
                      Catch::Matchers::ContainsSubstring("format 212"));

    // header / signal-line count mismatch
    write_text(tmp.path / "mismatch.hea", "mismatch 3 100 4\nmismatch.dat 16 1000(0)/mV\n");
    CHECK_THROWS_WITH(read_wfdb(tmp.path / "mismatch.hea"),
                      Catch::Matchers::ContainsSubstring("lead count mismatch"));

    CHECK_THROWS_AS(read_wfdb(tmp.path / "absent.hea"), WfdbError);
}

TEST_CASE("scp code dict parsing") {
    auto codes = parse_scp_codes("{'NORM': 100.0, 'SR': 0.0}");
    REQUIRE(codes.size() == 2);
    CHECK(codes[0] == "NORM");
    CHECK(codes[1] == "SR");
    CHECK(parse_scp_codes("{}").empty());
}

TEST_CASE("ptbxl split applies the strict normal rule and fold boundaries") {
    TempDir tmp("tsrnet_ptbxl");
    write_text(tmp.path / "scp_statements.csv",
               ",description,diagnostic,diagnostic_class\n"
               "NORM,normal ecg,1.0,NORM\n"
               "IMI,inferior mi,1.0,MI\n"
               "SR,sinus rhythm,,\n");

    // four records: pure NORM in train fold, NORM+IMI in train fold (dropped),
    // pure NORM in test fold, IMI in test fold
    const int D = 100;
    std::vector<std::int16_t> flat(static_cast<std::size_t>(D) * 2, 10);
    for (const char* name : {"rec1", "rec2", "rec3", "rec4"})
        write_wfdb(tmp.path / "records100", name, 2, 100.0, flat, 1000.0, 0);

    write_text(tmp.path / "ptbxl_database.csv",
               "ecg_id,scp_codes,strat_fold,filename_lr\n"
               "1,\"{'NORM': 100.0, 'SR': 0.0}\",1,records100/rec1\n"
               "2,\"{'NORM': 80.0, 'IMI': 50.0}\",2,records100/rec2\n"
               "3,\"{'NORM': 100.0}\",9,records100/rec3\n"
               "4,\"{'IMI': 100.0}\",10,records100/rec4\n");

    PtbxlLoadStats stats;
    std::ostringstream log;
    DatasetSplit split = load_ptbxl_split(tmp.path, PtbxlRule{}, &stats, log);

    REQUIRE(split.train.size() == 1);   // rec2 is abnormal under strict NORM
    CHECK(split.train[0].record_id == "1");
    CHECK(split.train[0].label == Label::normal);
    REQUIRE(split.test.size() == 2);
    CHECK(split.test[0].record_id == "3");
    CHECK(split.test[0].label == Label::normal);
    CHECK(split.test[1].record_id == "4");
    CHECK(split.test[1].label == Label::abnormal);
    CHECK(stats.n_train == 1);
    CHECK(stats.n_test_normal == 1);
    CHECK(stats.n_test_abnormal == 1);
    CHECK(stats.n_skipped == 0);
}

TEST_CASE("ptbxl skips unresolvable codes and unreadable files with a warning") {
    TempDir tmp("tsrnet_ptbxl_skip");
    write_text(tmp.path / "scp_statements.csv",
               ",description,diagnostic,diagnostic_class\n"
               "NORM,normal ecg,1.0,NORM\n"
               "IMI,inferior mi,1.0,MI\n");
    const int D = 50;
    std::vector<std::int16_t> flat(static_cast<std::size_t>(D) * 1, 5);
    for (const char* name : {"ok1", "ok2", "ok3"})
        write_wfdb(tmp.path / "records100", name, 1, 100.0, flat, 1000.0, 0);

    write_text(tmp.path / "ptbxl_database.csv",
               "ecg_id,scp_codes,strat_fold,filename_lr\n"
               "1,\"{'NORM': 100.0}\",1,records100/ok1\n"
               "2,\"{'WAT': 100.0}\",1,records100/ok2\n"          // unknown code
               "3,\"{'NORM': 100.0}\",1,records100/missing\n"     // no files
               "4,\"{'NORM': 100.0}\",9,records100/ok2\n"
               "5,\"{'IMI': 100.0}\",9,records100/ok3\n");

    PtbxlLoadStats stats;
    std::ostringstream log;
    DatasetSplit split = load_ptbxl_split(tmp.path, PtbxlRule{}, &stats, log);
    CHECK(split.train.size() == 1);
    CHECK(split.test.size() == 2);
    CHECK(stats.n_skipped == 2);
    CHECK(log.str().find("record 2") != std::string::npos);
    CHECK(log.str().find("record 3") != std::string::npos);
}

TEST_CASE("synthetic generation is deterministic in spec and seed") {
    SynthSpec spec;
    spec.n_normal_train = 5;
    spec.n_normal_test = 3;
    spec.n_abnormal_test = 3;
    spec.num_leads = 4;
    SynthDataset a = synth_dataset(spec, 77);
    SynthDataset b = synth_dataset(spec, 77);
    REQUIRE(a.train.size() == 5);
    REQUIRE(a.test.size() == 6);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        REQUIRE(a.train[i].record.samples.size() == b.train[i].record.samples.size());
        for (std::size_t j = 0; j < a.train[i].record.samples.size(); ++j)
            CHECK(a.train[i].record.samples[j] == b.train[i].record.samples[j]);
        CHECK(a.train[i].r_peaks == b.train[i].r_peaks);
    }
    SynthDataset c = synth_dataset(spec, 78);
    CHECK(a.train[0].record.samples[0] != c.train[0].record.samples[0]);
}

TEST_CASE("synthetic records look like the requested rhythm") {
    SynthSpec spec;
    spec.n_normal_train = 1;
    spec.n_normal_test = 0;
    spec.n_abnormal_test = 0;
    spec.num_leads = 2;
    spec.heart_rate_bpm_min = 60.0;   // pin to 60 bpm
    spec.heart_rate_bpm_max = 60.0;
    SynthDataset d = synth_dataset(spec, 5);
    const auto& rec = d.train[0];
    CHECK(rec.record.num_samples() == 1000);
    CHECK(rec.record.label == Label::normal);
    // ~10 beats in 10 s at 60 bpm (edge beats may fall off)
    CHECK(rec.r_peaks.size() >= 9);
    CHECK(rec.r_peaks.size() <= 11);
    CHECK(std::is_sorted(rec.r_peaks.begin(), rec.r_peaks.end()));
}

TEST_CASE("amplitude-spike anomalies are visibly taller than normal beats") {
    SynthSpec spec;
    spec.n_normal_train = 0;
    spec.n_normal_test = 0;
    spec.n_abnormal_test = 10;
    spec.num_leads = 1;
    spec.noise_mv = 0.0;
    spec.anomaly_kinds = {AnomalyKind::amplitude_spike};
    SynthDataset d = synth_dataset(spec, 11);
    for (const auto& sr : d.test) {
        REQUIRE(sr.anomaly == AnomalyKind::amplitude_spike);
        std::vector<double> heights;
        for (int p : sr.r_peaks) heights.push_back(sr.record.samples.at(p, 0));
        std::sort(heights.begin(), heights.end());
        const double median = heights[heights.size() / 2];
        CHECK(heights.back() >= 2.0 * median);
    }
}

TEST_CASE("dataset directory round trip is bit exact") {
    SynthSpec spec;
    spec.n_normal_train = 3;
    spec.n_normal_test = 2;
    spec.n_abnormal_test = 2;
    spec.num_leads = 3;
    DatasetSplit split = to_split(synth_dataset(spec, 99));

    TempDir tmp("tsrnet_dataset_rt");
    save_dataset(tmp.path, split);
    DatasetSplit loaded = load_dataset(tmp.path);
    REQUIRE(loaded.train.size() == split.train.size());
    REQUIRE(loaded.test.size() == split.test.size());
    CHECK(loaded.provenance == Provenance::synthetic);
    CHECK(loaded.seed == 99);
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        CHECK(loaded.test[i].record_id == split.test[i].record_id);
        CHECK(loaded.test[i].label == split.test[i].label);
        CHECK(loaded.test[i].sampling_rate_hz == split.test[i].sampling_rate_hz);
        REQUIRE(loaded.test[i].samples.size() == split.test[i].samples.size());
        for (std::size_t j = 0; j < split.test[i].samples.size(); ++j)
            CHECK(loaded.test[i].samples[j] == split.test[i].samples[j]);
    }
}

TEST_CASE("train split rejects abnormal records") {
    DatasetSplit bad;
    EcgRecord rec;
    rec.record_id = "x";
    rec.sampling_rate_hz = 100.0;
    rec.label = Label::abnormal;
    rec.samples = Tensor({10, 1});
    bad.train.push_back(rec);
    CHECK_THROWS_AS(bad.validate(), std::logic_error);
}
