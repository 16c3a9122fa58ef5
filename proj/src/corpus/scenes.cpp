#include "scenes.hpp"

namespace tdq::corpus::detail {

namespace {

constexpr Scene kScenes[] = {
    {"dining",
     {"ate", "cooked"},
     {"dinner", "pasta", "noodles"},
     {"restaurant", "chef",   "menu",   "dessert", "wine",   "soup",
      "salad",      "sauce",  "waiter", "table",   "bill",   "kitchen",
      "steak",      "bread",  "cheese", "garlic",  "pepper", "rice",
      "spoon",      "plate",  "recipe", "oven",    "pizza",  "candle"}},
    {"travel",
     {"visited", "toured"},
     {"paris", "london", "tokyo"},
     {"hotel",  "museum", "flight",   "airport",  "passport",  "luggage",
      "ticket", "tower",  "river",    "bridge",   "taxi",      "train",
      "map",    "guide",  "camera",   "beach",    "market",    "castle",
      "souvenir", "postcard", "cathedral", "harbor", "subway", "suitcase"}},
    {"music",
     {"sang", "played"},
     {"karaoke", "guitar", "piano"},
     {"song",   "band",   "singer",  "microphone", "concert", "album",
      "melody", "lyrics", "chorus",  "drummer",    "stage",   "speaker",
      "rhythm", "note",   "chord",   "violin",     "audience", "headphones",
      "playlist", "ballad", "tune",  "orchestra",  "studio",  "record"}},
    {"sport",
     {"ran", "trained"},
     {"marathon", "football", "tennis"},
     {"coach",  "team",   "stadium", "match",   "goal",    "ball",
      "racket", "medal",  "score",   "shoes",   "jersey",  "referee",
      "trophy", "fans",   "track",   "gym",     "sneakers", "whistle",
      "helmet", "league", "pitch",   "court",   "finish",  "runner"}},
    {"reading",
     {"read", "finished"},
     {"novel", "book", "poem"},
     {"author", "chapter", "library",  "plot",    "character", "ending",
      "page",   "cover",   "bookstore", "hero",   "villain",   "sequel",
      "review", "poet",    "verse",    "editor",  "publisher", "bookmark",
      "title",  "series",  "prologue", "narrator", "reader",   "shelf"}},
    {"garden",
     {"planted", "watered"},
     {"roses", "tomatoes", "trees"},
     {"seeds",  "soil",    "flower",     "shovel",  "fence",     "greenhouse",
      "fertilizer", "leaves", "petals",  "roots",   "sunlight",  "hose",
      "pot",    "weeds",   "bees",       "orchard", "harvest",   "compost",
      "gardener", "rake",  "vine",       "blossom", "lawn",      "tulip"}},
    {"movies",
     {"watched", "saw"},
     {"film", "movie", "show"},
     {"actor",   "actress", "cinema",  "popcorn",  "director", "trailer",
      "scene",   "screen",  "soundtrack", "cast",  "script",   "premiere",
      "effects", "costume", "projector", "seat",   "theater",  "episode",
      "comedy",  "drama",   "poster",  "subtitle", "critic",   "usher"}},
    {"shopping",
     {"bought", "ordered"},
     {"jacket", "phone", "laptop"},
     {"store",    "price",   "discount", "brand",   "cashier", "receipt",
      "mall",     "size",    "color",    "warranty", "battery", "charger",
      "model",    "sale",    "box",      "delivery", "coupon",  "wallet",
      "cart",     "shop",    "clerk",    "counter",  "label",   "bag"}},
};

constexpr Template kTemplates[] = {
    {"Yes-No", "did you see the {} ?"},
    {"Yes-No", "did you get the {} ?"},
    {"Yes-No", "do you like the {} ?"},
    {"Yes-No", "can you describe the {} ?"},
    {"Yes-No", "would you try the {} again ?"},
    {"What", "what about the {} ?"},
    {"What", "what is the {} like ?"},
    {"What", "what kind of {} was it ?"},
    {"What", "what did the {} look like ?"},
    {"What", "what do you think of the {} ?"},
    {"Where", "where is the {} ?"},
    {"Where", "where did you find the {} ?"},
    {"Where", "where was the {} ?"},
    {"Where", "where can i get the {} ?"},
    {"Where", "where did the {} come from ?"},
    {"How-many", "how many {} were there ?"},
    {"How-many", "how many {} did you see ?"},
    {"How-many", "how much was the {} ?"},
    {"How-many", "how many {} do you have ?"},
    {"Who", "who chose the {} ?"},
    {"Who", "who was with the {} ?"},
    {"Who", "who brought the {} ?"},
    {"Who", "who made the {} ?"},
    {"Who", "who else liked the {} ?"},
};

constexpr std::string_view kGenericTopics[] = {
    "thing", "stuff", "part", "one", "story", "idea", "place", "day",
};

constexpr std::string_view kPostTails[] = {
    "", "today", "yesterday", "last night", "with friends", "this weekend",
};

constexpr std::string_view kInterrogatives[] = {
    "what",     "how",      "why",      "when",     "where",
    "who",      "whom",     "whose",    "which",    "how many",
    "how much", "how about", "how long", "how often", "did",
    "do",       "does",     "can",      "could",    "would",
    "?",
};

}  // namespace

std::span<const Scene> scenes() { return kScenes; }
std::span<const Template> templates() { return kTemplates; }
std::span<const std::string_view> generic_topics() { return kGenericTopics; }
std::span<const std::string_view> post_tails() { return kPostTails; }
std::span<const std::string_view> default_interrogatives() { return kInterrogatives; }

}  // namespace tdq::corpus::detail
