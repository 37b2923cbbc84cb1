#include "srgf/log.hpp"

#include <charconv>
#include <iostream>

namespace srgf::log {

namespace {

Level g_level = Level::Info;
std::ostream* g_sink = nullptr;

const char* level_name(Level l) {
  switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    case Level::Off: break;
  }
  return "off";
}

bool needs_quotes(std::string_view v) {
  if (v.empty()) return true;
  for (char c : v)
    if (c == ' ' || c == '"' || c == '=' || c == '\t' || c == '\n') return true;
  return false;
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }
void set_sink(std::ostream* sink) { g_sink = sink; }

void emit(Level level, std::string_view event, std::initializer_list<Field> fields) {
  emit(level, event, std::span<const Field>(fields.begin(), fields.size()));
}

void emit(Level level, std::string_view event, std::span<const Field> fields) {
  if (level < g_level || g_level == Level::Off) return;
  std::ostream& out = g_sink ? *g_sink : std::cerr;
  out << "level=" << level_name(level) << " event=" << event;
  for (const auto& [key, value] : fields) {
    out << ' ' << key << '=';
    if (needs_quotes(value)) {
      out << '"';
      for (char c : value) {
        if (c == '"' || c == '\\') out << '\\';
        out << (c == '\n' ? ' ' : c);
      }
      out << '"';
    } else {
      out << value;
    }
  }
  out << '\n';
}

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string num(std::size_t v) { return std::to_string(v); }

}  // namespace srgf::log
