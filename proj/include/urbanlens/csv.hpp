#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ul::csv {

using Record = std::vector<std::string>;

// RFC-4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF or LF.
// A UTF-8 BOM at the start is skipped. Blank lines are ignored.
std::vector<Record> parse(std::string_view text);

std::string quote(std::string_view field);
std::string format_record(const Record& record);

} // namespace ul::csv
