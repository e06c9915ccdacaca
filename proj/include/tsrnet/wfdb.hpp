#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/signal.hpp"

namespace tsrnet {

struct WfdbError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace wfdb_detail {

struct LeadSpec {
    std::string file;
    int format = 0;
    double gain = 200.0;       // adu per mV, WFDB default
    int baseline = 0;
};

struct Header {
    std::string record_name;
    int num_leads = 0;
    double sampling_rate = 250.0;
    int num_samples = 0;
    std::vector<LeadSpec> leads;
};

inline Header parse_header(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw WfdbError("wfdb: cannot open header " + path.string());
    Header h;
    std::string line;
    bool have_record_line = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        if (!have_record_line) {
            std::string rate_field;
            if (!(ss >> h.record_name >> h.num_leads)) throw WfdbError("wfdb: bad record line");
            if (ss >> rate_field) {
                // rate may carry counter frequency as "fs/cf"
                h.sampling_rate = std::stod(rate_field.substr(0, rate_field.find('/')));
            }
            ss >> h.num_samples;
            have_record_line = true;
            continue;
        }
        if (static_cast<int>(h.leads.size()) >= h.num_leads) continue;
        LeadSpec lead;
        std::string gain_field;
        if (!(ss >> lead.file >> lead.format))
            throw WfdbError("wfdb " + h.record_name + ": bad signal line: " + line);
        if (ss >> gain_field) {
            // gain field: "gain(baseline)/units", every part optional
            const auto slash = gain_field.find('/');
            std::string g = gain_field.substr(0, slash);
            const auto paren = g.find('(');
            if (paren != std::string::npos) {
                const auto close = g.find(')');
                lead.baseline = std::stoi(g.substr(paren + 1, close - paren - 1));
                g = g.substr(0, paren);
            }
            if (!g.empty()) lead.gain = std::stod(g);
            if (lead.gain == 0.0) lead.gain = 200.0;
            int adc_res = 0, adc_zero = 0;
            if ((ss >> adc_res >> adc_zero) && paren == std::string::npos)
                lead.baseline = adc_zero;
        }
        h.leads.push_back(lead);
    }
    if (!have_record_line) throw WfdbError("wfdb: empty header " + path.string());
    if (static_cast<int>(h.leads.size()) != h.num_leads)
        throw WfdbError("wfdb " + h.record_name + ": lead count mismatch (" +
                        std::to_string(h.leads.size()) + " signal lines, header declares " +
                        std::to_string(h.num_leads) + ")");
    return h;
}

} // namespace wfdb_detail

// Reads a format-16 WFDB record: text header plus 16-bit little-endian
// two's-complement interleaved samples, converted to millivolts as
// (raw - baseline) / gain per lead.
inline EcgRecord read_wfdb(const std::filesystem::path& header_path) {
    const auto h = wfdb_detail::parse_header(header_path);
    for (const auto& lead : h.leads)
        if (lead.format != 16)
            throw WfdbError("wfdb " + h.record_name + ": unsupported signal format " +
                            std::to_string(lead.format) + " (only 16 supported)");
    for (const auto& lead : h.leads)
        if (lead.file != h.leads.front().file)
            throw WfdbError("wfdb " + h.record_name + ": multi-file records not supported");

    const auto dat_path = header_path.parent_path() / h.leads.front().file;
    std::ifstream is(dat_path, std::ios::binary);
    if (!is) throw WfdbError("wfdb " + h.record_name + ": missing signal file " + dat_path.string());

    const std::size_t expected =
        static_cast<std::size_t>(h.num_samples) * static_cast<std::size_t>(h.num_leads) * 2;
    std::vector<char> raw(expected);
    is.read(raw.data(), static_cast<std::streamsize>(expected));
    if (static_cast<std::size_t>(is.gcount()) != expected)
        throw WfdbError("wfdb " + h.record_name + ": truncated signal file (" +
                        std::to_string(is.gcount()) + " of " + std::to_string(expected) + " bytes)");

    EcgRecord rec;
    rec.record_id = h.record_name;
    rec.sampling_rate_hz = h.sampling_rate;
    rec.samples = Tensor({h.num_samples, h.num_leads});
    for (int i = 0; i < h.num_samples; ++i)
        for (int n = 0; n < h.num_leads; ++n) {
            const std::size_t off = (static_cast<std::size_t>(i) * h.num_leads + n) * 2;
            const std::int16_t v = static_cast<std::int16_t>(
                static_cast<std::uint8_t>(raw[off]) |
                (static_cast<std::uint16_t>(static_cast<std::uint8_t>(raw[off + 1])) << 8));
            const auto& lead = h.leads[static_cast<std::size_t>(n)];
            rec.samples.at(i, n) = (static_cast<double>(v) - lead.baseline) / lead.gain;
        }
    return rec;
}

} // namespace tsrnet
