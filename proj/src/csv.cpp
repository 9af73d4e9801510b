#include "urbanlens/csv.hpp"

#include "urbanlens/error.hpp"

namespace ul::csv {

std::vector<Record> parse(std::string_view text)
{
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") {
        text.remove_prefix(3);
    }
    std::vector<Record> rows;
    Record current;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        current.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(current.size() == 1 && current[0].empty())) {
            rows.push_back(std::move(current));
        }
        current.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started && !field.empty()) {
                fail("MalformedCsv", ApiCode::bad_request, "stray quote inside unquoted field");
            }
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            if (i + 1 < text.size() && text[i + 1] == '\n') {
                ++i;
            }
            end_record();
            break;
        case '\n':
            end_record();
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) {
        fail("MalformedCsv", ApiCode::bad_request, "unterminated quoted field");
    }
    if (field_started || !field.empty() || !current.empty()) {
        end_record();
    }
    return rows;
}

std::string quote(std::string_view field)
{
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_record(const Record& record)
{
    std::string line;
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (i) {
            line.push_back(',');
        }
        line += quote(record[i]);
    }
    line.push_back('\n');
    return line;
}

} // namespace ul::csv
