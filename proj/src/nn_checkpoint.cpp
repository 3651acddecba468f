#include "adfrl/nn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "adfrl/errors.hpp"

namespace adfrl::nn {

namespace {

std::string hexfloat(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

} // namespace

void save_params(const std::string& path, std::span<ParamRef> params,
                 const std::map<std::string, std::string>& meta) {
    std::ofstream out(path);
    if (!out) throw IoError("checkpoint: cannot open for writing: " + path);
    out << "adfrl-params v1\n";
    for (const auto& [k, v] : meta) out << "meta " << k << " " << v << "\n";
    for (const ParamRef& p : params) {
        out << "param " << p.name << " " << p.value.size() << "\n";
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            if (i) out << ' ';
            out << hexfloat(p.value[i]);
        }
        out << "\n";
    }
    out << "end\n";
    if (!out) throw IoError("checkpoint: write failed: " + path);
}

std::map<std::string, std::string> load_params(const std::string& path,
                                               std::span<ParamRef> params) {
    std::ifstream in(path);
    if (!in) throw IoError("checkpoint: cannot open: " + path);

    std::string line;
    if (!std::getline(in, line) || line != "adfrl-params v1")
        throw IoError("checkpoint: bad header in " + path);

    std::unordered_map<std::string, ParamRef*> by_name;
    for (ParamRef& p : params) by_name[p.name] = &p;

    std::map<std::string, std::string> meta;
    while (std::getline(in, line)) {
        if (line == "end") return meta;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            meta[key] = value;
        } else if (tag == "param") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw IoError("checkpoint: unknown parameter '" + name + "' in " + path);
            ParamRef& p = *it->second;
            if (p.value.size() != count)
                throw IoError("checkpoint: size mismatch for '" + name + "': stored " +
                              std::to_string(count) + ", expected " +
                              std::to_string(p.value.size()));
            std::string values;
            if (!std::getline(in, values))
                throw IoError("checkpoint: truncated value line for '" + name + "'");
            const char* cursor = values.c_str();
            for (std::size_t i = 0; i < count; ++i) {
                char* next = nullptr;
                const double v = std::strtod(cursor, &next);
                if (next == cursor)
                    throw IoError("checkpoint: malformed value for '" + name + "'");
                p.value[i] = v;
                cursor = next;
            }
        } else {
            throw IoError("checkpoint: unexpected line in " + path + ": " + line);
        }
    }
    throw IoError("checkpoint: missing end marker in " + path);
}

} // namespace adfrl::nn
