#include "prime/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "prime/errors.hpp"
#include "prime/features.hpp"
#include "prime/flows.hpp"

namespace prime {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint8_t kTcp = 6;
constexpr std::uint8_t kUdp = 17;

std::string flow_name(const FlowKey& key) {
    const char* proto = key.protocol == kTcp ? "tcp" : key.protocol == kUdp ? "udp" : "ip";
    return std::string(proto) + " " + format_ipv4(key.addr_a) + ":" +
           std::to_string(key.port_a) + " <-> " + format_ipv4(key.addr_b) + ":" +
           std::to_string(key.port_b);
}

bool rule_matches(const TupleRule& rule, const FlowKey& key) {
    if (rule.protocol) {
        const std::uint8_t want = *rule.protocol == "tcp" ? kTcp : kUdp;
        if (key.protocol != want) return false;
    }
    if (rule.port && key.port_a != *rule.port && key.port_b != *rule.port) return false;
    if (rule.addr && key.addr_a != *rule.addr && key.addr_b != *rule.addr) return false;
    return true;
}

}  // namespace

std::uint32_t parse_ipv4(const std::string& text) {
    std::uint32_t quad[4];
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
            throw Error("not an IPv4 address: \"" + text + "\"");
        std::uint32_t v = 0;
        std::size_t digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            v = v * 10 + (text[pos] - '0');
            ++pos;
            if (++digits > 3 || v > 255) throw Error("not an IPv4 address: \"" + text + "\"");
        }
        quad[i] = v;
        if (i < 3) {
            if (pos >= text.size() || text[pos] != '.')
                throw Error("not an IPv4 address: \"" + text + "\"");
            ++pos;
        }
    }
    if (pos != text.size()) throw Error("not an IPv4 address: \"" + text + "\"");
    return (quad[0] << 24) | (quad[1] << 16) | (quad[2] << 8) | quad[3];
}

std::string format_ipv4(std::uint32_t addr) {
    return std::to_string((addr >> 24) & 255) + "." + std::to_string((addr >> 16) & 255) + "." +
           std::to_string((addr >> 8) & 255) + "." + std::to_string(addr & 255);
}

LabelManifest parse_manifest(const std::string& json_text) {
    Json doc;
    try {
        doc = Json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({std::string("manifest is not valid JSON: ") + e.what()});
    }
    if (!doc.is_object()) throw ConfigError({"manifest root must be a JSON object"});

    std::vector<std::string> problems;
    LabelManifest m;
    for (const auto& item : doc.items())
        if (item.key() != "classes" && item.key() != "files" && item.key() != "tuples")
            problems.push_back("unknown key \"" + item.key() + "\"");

    if (doc.contains("classes")) {
        const Json& c = doc.at("classes");
        if (!c.is_array()) {
            problems.push_back("\"classes\" must be an array of strings");
        } else {
            for (const Json& e : c) {
                if (!e.is_string()) {
                    problems.push_back("\"classes\" must be an array of strings");
                    break;
                }
                m.classes.push_back(e.get<std::string>());
            }
            std::set<std::string> uniq(m.classes.begin(), m.classes.end());
            if (uniq.size() != m.classes.size())
                problems.push_back("\"classes\" must not repeat a label");
        }
    }

    if (doc.contains("files")) {
        const Json& f = doc.at("files");
        if (!f.is_object()) {
            problems.push_back("\"files\" must map capture basenames to labels");
        } else {
            for (const auto& item : f.items()) {
                if (!item.value().is_string()) {
                    problems.push_back("\"files." + item.key() + "\" must be a label string");
                    continue;
                }
                m.files.emplace_back(item.key(), item.value().get<std::string>());
            }
        }
    }

    if (doc.contains("tuples")) {
        const Json& t = doc.at("tuples");
        if (!t.is_array()) {
            problems.push_back("\"tuples\" must be an array of rule objects");
        } else {
            for (std::size_t i = 0; i < t.size(); ++i) {
                const Json& r = t[i];
                const std::string path = "tuples[" + std::to_string(i) + "]";
                if (!r.is_object()) {
                    problems.push_back("\"" + path + "\" must be an object");
                    continue;
                }
                TupleRule rule;
                for (const auto& item : r.items())
                    if (item.key() != "protocol" && item.key() != "port" &&
                        item.key() != "addr" && item.key() != "label")
                        problems.push_back("unknown key \"" + path + "." + item.key() + "\"");
                if (r.contains("protocol")) {
                    const Json& v = r.at("protocol");
                    if (!v.is_string() ||
                        (v.get<std::string>() != "tcp" && v.get<std::string>() != "udp"))
                        problems.push_back("\"" + path + ".protocol\" must be \"tcp\" or \"udp\"");
                    else
                        rule.protocol = v.get<std::string>();
                }
                if (r.contains("port")) {
                    const Json& v = r.at("port");
                    if (!v.is_number_integer() || v.get<long long>() < 1 ||
                        v.get<long long>() > 65535)
                        problems.push_back("\"" + path + ".port\" must lie in 1..65535");
                    else
                        rule.port = static_cast<std::uint16_t>(v.get<unsigned>());
                }
                if (r.contains("addr")) {
                    const Json& v = r.at("addr");
                    if (!v.is_string()) {
                        problems.push_back("\"" + path + ".addr\" must be a dotted-quad string");
                    } else {
                        try {
                            rule.addr = parse_ipv4(v.get<std::string>());
                        } catch (const Error& e) {
                            problems.push_back("\"" + path + ".addr\": " + e.what());
                        }
                    }
                }
                if (!r.contains("label") || !r.at("label").is_string() ||
                    r.at("label").get<std::string>().empty())
                    problems.push_back("\"" + path + "\" needs a non-empty \"label\"");
                else
                    rule.label = r.at("label").get<std::string>();
                if (!rule.protocol && !rule.port && !rule.addr)
                    problems.push_back("\"" + path + "\" needs at least one selector");
                m.tuples.push_back(std::move(rule));
            }
        }
    }

    // Labels used anywhere must come from the explicit class list when the
    // manifest pins one.
    if (!m.classes.empty()) {
        const std::set<std::string> allowed(m.classes.begin(), m.classes.end());
        for (const auto& [file, label] : m.files)
            if (!allowed.count(label))
                problems.push_back("\"files." + file + "\" label \"" + label +
                                   "\" is not in \"classes\"");
        for (std::size_t i = 0; i < m.tuples.size(); ++i)
            if (!m.tuples[i].label.empty() && !allowed.count(m.tuples[i].label))
                problems.push_back("\"tuples[" + std::to_string(i) + "]\" label \"" +
                                   m.tuples[i].label + "\" is not in \"classes\"");
    }

    if (!problems.empty()) throw ConfigError(std::move(problems));
    return m;
}

LabelManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str());
}

IngestResult ingest_pcaps(const std::vector<std::string>& paths, const LabelManifest& manifest,
                          const IngestOptions& opt) {
    if (opt.n_b == 0 && opt.n_p == 0)
        throw ConfigError({"n_b and n_p cannot both be 0"});

    // Class table: explicit order wins, otherwise the sorted set of every
    // label the manifest mentions, so the label space does not depend on
    // which flows happen to appear in the captures.
    std::vector<std::string> class_names = manifest.classes;
    if (class_names.empty()) {
        std::set<std::string> labels;
        for (const auto& [file, label] : manifest.files) labels.insert(label);
        for (const TupleRule& rule : manifest.tuples) labels.insert(rule.label);
        class_names.assign(labels.begin(), labels.end());
    }
    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < class_names.size(); ++i)
        class_index[class_names[i]] = static_cast<int>(i);
    {
        std::vector<std::string> problems;
        for (const auto& [file, label] : manifest.files)
            if (!class_index.count(label))
                problems.push_back("file label \"" + label + "\" is not in the class list");
        for (const TupleRule& rule : manifest.tuples)
            if (!class_index.count(rule.label))
                problems.push_back("tuple label \"" + rule.label +
                                   "\" is not in the class list");
        if (!problems.empty()) throw ConfigError(std::move(problems));
    }

    std::map<std::string, std::string> file_labels(manifest.files.begin(),
                                                   manifest.files.end());

    IngestResult result;
    result.dataset.n_b = opt.n_b;
    result.dataset.n_p = opt.n_p;
    result.dataset.norms = opt.norms;
    result.dataset.class_names = class_names;

    for (const std::string& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open capture: " + path);
        PcapReader reader(in);
        std::vector<RawPacket> packets;
        while (auto pkt = reader.next()) packets.push_back(std::move(*pkt));
        result.stats.pcap.packets += reader.stats().packets;
        result.stats.pcap.non_ip += reader.stats().non_ip;
        result.stats.pcap.non_transport += reader.stats().non_transport;

        const std::string basename = std::filesystem::path(path).filename().string();
        const auto file_label = file_labels.find(basename);

        for (const FlowRecord& flow : assemble_flows(packets, opt.idle_timeout, opt.n_b)) {
            ++result.stats.flows_seen;
            std::set<std::string> labels;
            if (file_label != file_labels.end()) labels.insert(file_label->second);
            for (const TupleRule& rule : manifest.tuples)
                if (rule_matches(rule, flow.key)) labels.insert(rule.label);
            if (labels.empty()) {
                ++result.stats.unlabeled;
                continue;
            }
            if (labels.size() > 1) {
                std::string joined;
                for (const std::string& l : labels) joined += (joined.empty() ? "" : ", ") + l;
                throw Error("conflicting labels for flow " + flow_name(flow.key) + " in " +
                            basename + ": " + joined);
            }
            FeatureVector fv = extract_features(flow, opt.n_b, opt.n_p, opt.norms);
            fv.label = class_index.at(*labels.begin());
            result.dataset.samples.push_back(std::move(fv));
            ++result.stats.labeled;
        }
    }
    return result;
}

}  // namespace prime
