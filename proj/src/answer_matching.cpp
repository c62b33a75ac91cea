#include "aiq/answer_matching.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>

namespace aiq::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_terminal_punct(unsigned char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':':
    case '"': case '\'':
      return true;
    default:
      return false;
  }
}

enum class WordKind { unit, teen, tens, hundred, scale, conjunction, sign };

struct NumberWord {
  WordKind kind;
  long long value;
};

const std::map<std::string, NumberWord, std::less<>>& number_words() {
  static const std::map<std::string, NumberWord, std::less<>> words = [] {
    std::map<std::string, NumberWord, std::less<>> w;
    const std::array<const char*, 10> units = {"zero", "one", "two",   "three", "four",
                                               "five", "six", "seven", "eight", "nine"};
    const std::array<const char*, 10> teens = {"ten",     "eleven",  "twelve",    "thirteen",
                                               "fourteen", "fifteen", "sixteen",  "seventeen",
                                               "eighteen", "nineteen"};
    const std::array<const char*, 8> tens = {"twenty", "thirty",  "forty",  "fifty",
                                             "sixty",  "seventy", "eighty", "ninety"};
    for (std::size_t i = 0; i < units.size(); ++i) w.emplace(units[i], NumberWord{WordKind::unit, static_cast<long long>(i)});
    for (std::size_t i = 0; i < teens.size(); ++i) w.emplace(teens[i], NumberWord{WordKind::teen, static_cast<long long>(10 + i)});
    for (std::size_t i = 0; i < tens.size(); ++i) w.emplace(tens[i], NumberWord{WordKind::tens, static_cast<long long>(20 + 10 * i)});
    w.emplace("hundred", NumberWord{WordKind::hundred, 100});
    w.emplace("thousand", NumberWord{WordKind::scale, 1000});
    w.emplace("million", NumberWord{WordKind::scale, 1000000});
    w.emplace("billion", NumberWord{WordKind::scale, 1000000000});
    w.emplace("and", NumberWord{WordKind::conjunction, 0});
    w.emplace("minus", NumberWord{WordKind::sign, -1});
    w.emplace("negative", NumberWord{WordKind::sign, -1});
    return w;
  }();
  return words;
}

struct Token {
  enum Kind { word, number, separator } kind;
  std::string text;
  double value = 0;
};

// Splits lower-cased text into words, digit numbers and separators. Hyphens and
// whitespace between words are dropped so "twenty-one" reads as two words; any
// other punctuation becomes a separator that ends a spelled-out number.
std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = s[i];
    const bool minus_digit = c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])) &&
                             (i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1])));
    if (std::isdigit(c) || minus_digit) {
      std::size_t j = i + (minus_digit ? 1 : 0);
      std::string digits = minus_digit ? "-" : "";
      while (j < s.size()) {
        const unsigned char d = s[j];
        if (std::isdigit(d)) {
          digits += static_cast<char>(d);
          ++j;
        } else if ((d == '.' || d == ',') && j + 1 < s.size() &&
                   std::isdigit(static_cast<unsigned char>(s[j + 1]))) {
          // "1,000" groups thousands; "3.5" is a decimal point.
          if (d == '.') digits += '.';
          ++j;
        } else {
          break;
        }
      }
      out.push_back({Token::number, digits, std::strtod(digits.c_str(), nullptr)});
      i = j;
    } else if (std::isalpha(c)) {
      std::size_t j = i;
      std::string word;
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(s[j])));
        ++j;
      }
      out.push_back({Token::word, std::move(word)});
      i = j;
    } else if (is_space(c) || c == '-') {
      ++i;
    } else {
      out.push_back({Token::separator, std::string(1, static_cast<char>(c))});
      ++i;
    }
  }
  return out;
}

class SpelledNumberParser {
 public:
  explicit SpelledNumberParser(std::vector<double>& sink) : sink_(sink) {}

  void feed(const NumberWord& w) {
    switch (w.kind) {
      case WordKind::unit:
        if (last_ == WordKind::unit || last_ == WordKind::teen) flush();
        current_ += w.value;
        break;
      case WordKind::teen:
      case WordKind::tens:
        if (last_ == WordKind::unit || last_ == WordKind::teen || last_ == WordKind::tens) flush();
        current_ += w.value;
        break;
      case WordKind::hundred:
        if (!active_) current_ = 1;
        current_ = (current_ == 0 ? 1 : current_) * 100;
        break;
      case WordKind::scale:
        total_ += (current_ == 0 && !active_ ? 1 : current_) * w.value;
        current_ = 0;
        break;
      case WordKind::conjunction:
      case WordKind::sign:
        return;
    }
    active_ = true;
    last_ = w.kind;
  }

  void set_negative() {
    flush();
    negative_ = true;
  }

  void flush() {
    if (active_) {
      const double v = static_cast<double>(total_ + current_);
      sink_.push_back(negative_ ? -v : v);
    }
    total_ = current_ = 0;
    active_ = negative_ = false;
    last_ = WordKind::conjunction;
  }

  bool active() const { return active_; }
  WordKind last() const { return last_; }

 private:
  std::vector<double>& sink_;
  long long total_ = 0;
  long long current_ = 0;
  bool active_ = false;
  bool negative_ = false;
  WordKind last_ = WordKind::conjunction;
};

}  // namespace

std::string normalize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
  }
  while (!out.empty() && (is_terminal_punct(static_cast<unsigned char>(out.back())) || out.back() == ' ')) {
    out.pop_back();
  }
  return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
  const std::string n = normalize(needle);
  if (n.empty()) return false;
  return normalize(haystack).find(n) != std::string::npos;
}

std::vector<double> extract_numbers(std::string_view text) {
  const auto& words = number_words();
  const auto tokens = tokenize(text);
  std::vector<double> found;
  SpelledNumberParser parser(found);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == Token::number) {
      parser.flush();
      found.push_back(t.value);
      continue;
    }
    if (t.kind == Token::separator) {
      parser.flush();
      continue;
    }
    auto it = words.find(t.text);
    if (it == words.end()) {
      parser.flush();
      continue;
    }
    const NumberWord& w = it->second;
    if (w.kind == WordKind::sign) {
      parser.set_negative();
      continue;
    }
    if (w.kind == WordKind::conjunction) {
      // "and" only continues a number after hundred/thousand.
      const bool continues = parser.active() &&
                             (parser.last() == WordKind::hundred || parser.last() == WordKind::scale) &&
                             i + 1 < tokens.size() && tokens[i + 1].kind == Token::word &&
                             words.contains(tokens[i + 1].text);
      if (!continues) parser.flush();
      continue;
    }
    parser.feed(w);
  }
  parser.flush();
  return found;
}

std::optional<double> parse_number(std::string_view text) {
  const std::string n = normalize(text);
  if (n.empty()) return std::nullopt;
  const auto tokens = tokenize(n);
  if (tokens.size() == 1 && tokens[0].kind == Token::number) return tokens[0].value;
  for (const auto& t : tokens) {
    if (t.kind != Token::word || !number_words().contains(t.text)) return std::nullopt;
  }
  const auto numbers = extract_numbers(n);
  if (numbers.size() != 1) return std::nullopt;
  return numbers.front();
}

std::string number_to_words(long long value) {
  static const std::array<const char*, 20> small = {
      "zero",    "one",     "two",       "three",    "four",    "five",    "six",
      "seven",   "eight",   "nine",      "ten",      "eleven",  "twelve",  "thirteen",
      "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen"};
  static const std::array<const char*, 10> tens = {"",      "",      "twenty",  "thirty", "forty",
                                                   "fifty", "sixty", "seventy", "eighty", "ninety"};
  if (value < 0) return "minus " + number_to_words(-value);
  if (value < 20) return small[static_cast<std::size_t>(value)];
  if (value < 100) {
    std::string w = tens[static_cast<std::size_t>(value / 10)];
    if (value % 10) w += std::string("-") + small[static_cast<std::size_t>(value % 10)];
    return w;
  }
  if (value < 1000) {
    std::string w = std::string(small[static_cast<std::size_t>(value / 100)]) + " hundred";
    if (value % 100) w += " " + number_to_words(value % 100);
    return w;
  }
  static const std::array<std::pair<long long, const char*>, 3> scales = {
      {{1000000000LL, "billion"}, {1000000LL, "million"}, {1000LL, "thousand"}}};
  for (const auto& [size, name] : scales) {
    if (value >= size) {
      std::string w = number_to_words(value / size) + " " + name;
      if (value % size) w += " " + number_to_words(value % size);
      return w;
    }
  }
  return std::to_string(value);
}

}  // namespace aiq::text
