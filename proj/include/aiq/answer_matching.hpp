#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aiq::text {

// Case-fold (ASCII), trim, collapse internal whitespace, strip terminal
// punctuation.
std::string normalize(std::string_view raw);

// True if the normalised haystack contains the normalised needle.
bool contains_normalized(std::string_view haystack, std::string_view needle);

// Parses digits ("21", "-3.5") or English number words ("twenty-one",
// "one hundred and five", "minus seven"). Whole-string match only.
std::optional<double> parse_number(std::string_view text);

// English words for an integer, hyphenated tens ("twenty-one").
std::string number_to_words(long long value);

// Every number mentioned in free text, whether written with digits or words.
std::vector<double> extract_numbers(std::string_view text);

}  // namespace aiq::text
