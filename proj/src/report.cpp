#include <algorithm>
#include <cstdio>

#include "json.hpp"

#include "cgan/errors.hpp"
#include "cgan/pipeline.hpp"
#include "cgan/util.hpp"

namespace cgan {

using nlohmann::json;

namespace {

const char* kMethodColumns[] = {"classic_gan", "discogan", "crystalgan_noconstraints", "crystalgan"};

void recount(const ValidationReport& r, const std::filesystem::path& path) {
    int total = static_cast<int>(r.entries.size());
    int good = 0;
    int good_any = 0;
    for (const ValidationEntry& e : r.entries) {
        if (!e.parsed)
            continue;
        if (e.verdict.good) {
            ++good_any;
            if (!r.require_ternary || e.verdict.ternary)
                ++good;
        }
    }
    if (total != r.total || good != r.good || good_any != r.good_any_arity)
        throw InvariantViolation("stored totals in " + path.string() + " disagree with its structure list");
}

} // namespace

ComparisonReport build_comparison(const std::vector<std::filesystem::path>& artifact_dirs) {
    ComparisonReport rep;
    for (const auto& dir : artifact_dirs) {
        const auto path = dir / "validation" / "report.json";
        ValidationReport r = read_validation_report_json(path);
        recount(r, path);
        ReportCell& cell = rep.cells[r.system][r.method];
        cell.good += r.good;
        cell.total += r.total;
        cell.seeds.push_back(r.seed);
        std::sort(cell.seeds.begin(), cell.seeds.end());
    }
    return rep;
}

std::string render_comparison(const ComparisonReport& rep) {
    std::string out = "good candidates / generated, summed over seeds\n\n";

    std::vector<std::string> headers{"system"};
    for (const char* m : kMethodColumns)
        headers.push_back(m);

    std::vector<std::vector<std::string>> rows;
    for (const auto& [system, methods] : rep.cells) {
        std::vector<std::string> row{system};
        for (const char* m : kMethodColumns) {
            auto it = methods.find(m);
            if (it == methods.end()) {
                row.push_back("-");
            } else {
                row.push_back(std::to_string(it->second.good) + "/" + std::to_string(it->second.total));
            }
        }
        rows.push_back(std::move(row));
    }

    std::vector<size_t> widths(headers.size());
    for (size_t c = 0; c < headers.size(); ++c) {
        widths[c] = headers[c].size();
        for (const auto& row : rows)
            widths[c] = std::max(widths[c], row[c].size());
    }

    auto emit_row = [&](const std::vector<std::string>& row) {
        for (size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size())
                out += std::string(widths[c] - row[c].size() + 2, ' ');
        }
        out += "\n";
    };
    emit_row(headers);
    for (const auto& row : rows)
        emit_row(row);

    for (const auto& [system, methods] : rep.cells) {
        for (const char* m : kMethodColumns) {
            auto it = methods.find(m);
            if (it == methods.end())
                continue;
            out += "\n" + system + " " + m + " seeds:";
            for (std::uint64_t s : it->second.seeds)
                out += " " + std::to_string(s);
        }
    }
    if (!rep.cells.empty())
        out += "\n";
    return out;
}

std::string comparison_to_json_text(const ComparisonReport& rep) {
    json j;
    json systems = json::object();
    for (const auto& [system, methods] : rep.cells) {
        json row = json::object();
        for (const auto& [method, cell] : methods)
            row[method] = {{"good", cell.good}, {"total", cell.total}, {"seeds", cell.seeds}};
        systems[system] = std::move(row);
    }
    j["systems"] = std::move(systems);
    return j.dump(1);
}

} // namespace cgan
