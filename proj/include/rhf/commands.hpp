#pragma once

#include "rhf/config.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace rhf {

// Column-oriented data table written as CSV.
struct Table {
    std::string name; // file stem
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

// Summary document: section -> ordered (key, value) pairs, written in the config grammar.
struct Summary {
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;

    void set(const std::string& section, const std::string& key, const std::string& value);
    void set(const std::string& section, const std::string& key, double value);
    std::string text() const;
};

struct ResultBundle {
    std::string command;
    Summary summary;
    std::vector<Table> tables;
    bool failed = false; // completed but a check did not pass (exit code 3)
};

// Writes each table as <dir>/<name>.csv with provenance comments, the summary
// as <dir>/summary.txt and the effective config as <dir>/config.txt.
void write_bundle(const ResultBundle& bundle, const RunConfig& cfg, const std::string& directory);

// Formats a table exactly as write_bundle does.
std::string table_csv(const Table& table, const RunConfig& cfg, const std::string& command);

ResultBundle run_bands(const RunConfig& cfg, std::ostream& log);
ResultBundle run_respond(const RunConfig& cfg, std::ostream& log);
ResultBundle run_epsm(const RunConfig& cfg, std::ostream& log);
ResultBundle run_defect(const RunConfig& cfg, std::ostream& log);
ResultBundle run_homogenize(const RunConfig& cfg, std::ostream& log);
ResultBundle run_selftest(const RunConfig& cfg, std::ostream& log);

const std::vector<std::string>& command_names();

// Dispatches, writes the bundle to cfg.output.directory and returns the exit
// code: 0 success, 2 validation error, 3 numerical failure. Errors go to log.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log);

} // namespace rhf
