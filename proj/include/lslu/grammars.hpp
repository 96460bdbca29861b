// Copyright 2026 The LSLU Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "lslu/clm_data.hpp"
#include "lslu/datasim.hpp"

namespace lslu::datasim {

namespace detail {
inline std::vector<std::vector<std::string>> entries(std::initializer_list<const char*> items) {
  std::vector<std::vector<std::string>> out;
  for (const char* s : items) out.push_back(split_ws(s));
  return out;
}
inline Template tpl(std::string intent, const char* query, const char* response, double w = 1.0) {
  return {std::move(intent), split_ws(query), split_ws(response), w};
}
}  // namespace detail

/// Music domain: 4 intents, 6 slot types.
inline Grammar music_grammar() {
  using detail::entries;
  using detail::tpl;
  Grammar g;
  g.domain = "music";
  g.templates = {
      tpl("PlayMusic", "play <song>", "playing <song> by <artist>", 1.5),
      tpl("PlayMusic", "play <song> by <artist>", "playing <song> by <artist>"),
      tpl("PlayMusic", "play some <genre> music", "playing <genre> music"),
      tpl("PlayMusic", "i want to hear <artist>", "here is <artist> on your speaker"),
      tpl("PlayMusic", "play the album <album>", "playing <album> by <artist>"),
      tpl("AddToPlaylist", "add <song> to my <playlist> playlist", "added <song> to <playlist>", 1.5),
      tpl("AddToPlaylist", "put this song on <playlist>", "added it to <playlist>"),
      tpl("AddToPlaylist", "add <song> by <artist> to <playlist>", "added <song> to <playlist>"),
      tpl("AddToPlaylist", "save the album <album> to <playlist>", "saved <album> to <playlist>"),
      tpl("RateMusic", "rate this song <rating>", "ok i rated it <rating>", 1.5),
      tpl("RateMusic", "give <song> <rating>", "ok <song> now has <rating>"),
      tpl("RateMusic", "rate the album <album> <rating>", "rated <album> <rating>"),
      tpl("SearchMusic", "who sings <song>", "<song> is sung by <artist>", 1.5),
      tpl("SearchMusic", "find songs by <artist>", "here are songs by <artist>"),
      tpl("SearchMusic", "what <genre> albums came out this week", "here are new <genre> albums"),
      tpl("SearchMusic", "which album has <song>", "<song> is on <album>"),
  };
  g.lexicons = {
      {"song", entries({"shake it off", "blank space", "hello", "yellow", "bad guy", "thunder",
                        "let it be", "hey jude", "wonderwall", "smooth operator",
                        "dancing queen", "rolling in the deep", "fix you", "believer",
                        "ocean eyes", "champagne supernova"})},
      {"artist", entries({"taylor swift", "adele", "coldplay", "billie eilish", "imagine dragons",
                          "the beatles", "oasis", "sade", "abba", "prince"})},
      {"album", entries({"nineteen eighty nine", "twenty five", "parachutes", "evolve",
                         "abbey road", "morning glory", "diamond life", "arrival",
                         "when we all fall asleep"})},
      {"playlist", entries({"workout", "road trip", "chill vibes", "morning coffee", "party mix",
                            "focus", "sunday brunch", "late night drive"})},
      {"genre", entries({"jazz", "rock", "hip hop", "classical", "country", "blues", "soul",
                         "indie folk"})},
      {"rating", entries({"one star", "two stars", "three stars", "four stars", "five stars",
                          "a thumbs up", "a thumbs down"})},
  };
  return g;
}

/// Shopping domain: 4 intents, 5 slot types.
inline Grammar shopping_grammar() {
  using detail::entries;
  using detail::tpl;
  Grammar g;
  g.domain = "shopping";
  g.templates = {
      tpl("AddToCart", "add <product> to my cart", "added <product> from <brand> to your cart", 1.5),
      tpl("AddToCart", "add <quantity> <product> to my cart", "added <quantity> <product> to your cart"),
      tpl("AddToCart", "put the <color> <product> in my basket", "added the <color> <product> to your cart"),
      tpl("SearchProduct", "find <brand> <product>", "here are <product> from <brand>", 1.5),
      tpl("SearchProduct", "show me <color> <product> in size <size>", "here are <color> <product> in size <size>"),
      tpl("SearchProduct", "search for <product> under twenty dollars", "here are <product> under twenty dollars"),
      tpl("BuyItem", "buy <quantity> <product>", "ordered <quantity> <product> from <brand>", 1.5),
      tpl("BuyItem", "order the <brand> <product> in <color>", "ordered the <color> <product>"),
      tpl("BuyItem", "reorder <product>", "reordered <product> from <brand>"),
      tpl("CheckOrder", "where is my <product> order", "your <product> order arrives tomorrow", 1.5),
      tpl("CheckOrder", "track my order from <brand>", "your <brand> order has shipped"),
  };
  g.lexicons = {
      {"product", entries({"running shoes", "coffee beans", "paper towels", "headphones",
                           "yoga mat", "water bottle", "phone charger", "rain jacket",
                           "dish soap", "backpack"})},
      {"brand", entries({"acme", "northwind", "contoso", "fabrikam", "globex", "initech"})},
      {"color", entries({"red", "blue", "black", "forest green", "light gray", "white"})},
      {"size", entries({"small", "medium", "large", "extra large", "ten", "eleven"})},
      {"quantity", entries({"one", "two", "three", "a dozen", "a pack of six"})},
  };
  return g;
}

/// Weather domain: 3 intents, 4 slot types.
inline Grammar weather_grammar() {
  using detail::entries;
  using detail::tpl;
  Grammar g;
  g.domain = "weather";
  g.templates = {
      tpl("GetWeather", "what is the weather in <city>", "it is sunny in <city>", 1.5),
      tpl("GetWeather", "how is the weather <date>", "it will be mild <date>"),
      tpl("GetWeather", "what is the weather in <city> <date>", "it will be cloudy in <city> <date>"),
      tpl("GetForecast", "will it <condition> in <city> <date>", "no <condition> expected in <city> <date>", 1.5),
      tpl("GetForecast", "is it going to <condition> <date>", "there is a chance it will <condition> <date>"),
      tpl("GetForecast", "forecast for <city> at <time>", "at <time> in <city> it will be clear"),
      tpl("GetTemperature", "how cold is it in <city>", "it is five degrees in <city>", 1.5),
      tpl("GetTemperature", "what is the temperature <date> at <time>", "it will be ten degrees at <time>"),
  };
  g.lexicons = {
      {"city", entries({"seattle", "boston", "new york", "san francisco", "paris", "tokyo",
                        "mexico city", "berlin"})},
      {"date", entries({"today", "tomorrow", "this weekend", "on monday", "next week"})},
      {"condition", entries({"rain", "snow", "hail", "be windy", "be foggy"})},
      {"time", entries({"noon", "midnight", "six pm", "nine in the morning", "sunset"})},
  };
  return g;
}

inline std::vector<Grammar> builtin_grammars() {
  return {music_grammar(), shopping_grammar(), weather_grammar()};
}

inline Grammar grammar_by_name(const std::string& name) {
  for (auto& g : builtin_grammars())
    if (g.domain == name) return g;
  throw ConfigError("unknown domain '" + name + "' (expected music, shopping, or weather)");
}

/// Vocabulary covering every built-in grammar.
inline Vocab builtin_vocab() {
  Vocab v;
  for (const auto& g : builtin_grammars())
    for (const auto& t : g.tokens()) v.add(t);
  return v;
}

}  // namespace lslu::datasim
