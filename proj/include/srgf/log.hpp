#pragma once

#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>

// logfmt-style lines on stderr: `level=info event=train.epoch epoch=3 loss=0.69`.
namespace srgf::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

using Field = std::pair<std::string_view, std::string>;

void set_level(Level level);
Level level();
/// Redirects output; nullptr restores stderr.
void set_sink(std::ostream* sink);

void emit(Level level, std::string_view event, std::initializer_list<Field> fields = {});
void emit(Level level, std::string_view event, std::span<const Field> fields);

inline void debug(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::Debug, event, fields); }
inline void info(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::Info, event, fields); }
inline void warn(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::Warn, event, fields); }
inline void error(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::Error, event, fields); }

/// Shortest round-trip decimal form of a double.
std::string num(double v);
std::string num(std::size_t v);

}  // namespace srgf::log
