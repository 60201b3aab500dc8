//! The built-in shopping, travel and food-delivery apps.
//!
//! Template descriptions keep at most five fixed words and no repeated
//! words, and every parameter is two words sharing nothing with the others.
//! Under the reference models two tasks from the same template with
//! different parameters therefore pass the embedding gate but not the
//! reranker, so replay comes from genuinely repeated tasks.

use super::app::{AppBuilder, SimApp};
use crate::error::Result;

pub const SHOPPING: &str = "shopping";
pub const TRAVEL: &str = "travel";
pub const FOOD: &str = "food";

pub fn shopping() -> Result<SimApp> {
    AppBuilder::new(SHOPPING, "home")
        .screen(
            "home",
            &[
                ("search bar", "search"),
                ("cart", "cart"),
                ("orders", "orders"),
                ("account", "account"),
                ("*deals", "deals"),
            ],
        )
        .screen("search", &[("<input>", "results")])
        .screen(
            "results",
            &[("*{} top result", "product"), ("filter", "filters"), ("sort by price", "sorted")],
        )
        .screen("sorted", &[("{} cheapest", "product")])
        .screen("filters", &[("brand", "filtered"), ("price range", "filtered")])
        .screen("filtered", &[("{} filtered result", "product")])
        .screen(
            "product",
            &[
                ("add to cart", "added"),
                ("buy now", "checkout"),
                ("reviews", "reviews"),
                ("wishlist button", "wishlisted"),
            ],
        )
        .screen("added", &[("go to cart", "cart"), ("continue shopping", "home")])
        .screen("cart", &[("checkout", "checkout"), ("clear cart", "cart_empty")])
        .screen("cart_empty", &[])
        .screen("checkout", &[("place order", "confirmation"), ("change address", "address")])
        .screen("confirmation", &[])
        .screen("address", &[])
        .screen("orders", &[("search orders", "order_search")])
        .screen("order_search", &[("<input>", "order_results")])
        .screen("order_results", &[("*{} order", "order_detail")])
        .screen(
            "order_detail",
            &[("track package", "tracking"), ("return item", "return_form"), ("buy again", "product")],
        )
        .screen("tracking", &[("<wait>", "tracking_refreshed")])
        .screen("tracking_refreshed", &[])
        .screen("return_form", &[("submit return", "return_done")])
        .screen("return_done", &[])
        .screen("reviews", &[("<swipe:down>", "reviews_more")])
        .screen("reviews_more", &[])
        .screen("wishlisted", &[])
        .screen("account", &[("settings", "settings"), ("addresses", "address")])
        .screen("settings", &[])
        .screen("deals", &[("<swipe:up>", "deals_more")])
        .screen("deals_more", &[])
        .params(&[
            "red sneakers",
            "wool scarf",
            "coffee grinder",
            "yoga mat",
            "desk lamp",
            "phone charger",
            "garden hose",
            "baby stroller",
            "gaming mouse",
            "water bottle",
        ])
        .template(
            "add_to_cart",
            "search {} add to cart",
            &["click:search bar", "input", "click:{} top result", "click:add to cart"],
        )
        .template(
            "buy_now",
            "buy {} right now",
            &["click:search bar", "input", "click:{} top result", "click:buy now", "click:place order"],
        )
        .template(
            "reviews",
            "read reviews about {}",
            &["click:search bar", "input", "click:{} top result", "click:reviews", "swipe:down"],
        )
        .template(
            "cheapest",
            "find cheapest {} listing",
            &["click:search bar", "input", "click:sort by price", "click:{} cheapest"],
        )
        .template(
            "wishlist",
            "save {} in wishlist",
            &["click:search bar", "input", "click:{} top result", "click:wishlist button"],
        )
        .template(
            "track",
            "track package containing {}",
            &["click:orders", "click:search orders", "input", "click:{} order", "click:track package", "wait:3"],
        )
        .template(
            "return",
            "return purchased {} item",
            &["click:orders", "click:search orders", "input", "click:{} order", "click:return item", "click:submit return"],
        )
        .template(
            "reorder",
            "reorder {} again",
            &[
                "click:orders",
                "click:search orders",
                "input",
                "click:{} order",
                "click:buy again",
                "click:buy now",
                "click:place order",
            ],
        )
        .template(
            "brand_filter",
            "filter {} by brand",
            &["click:search bar", "input", "click:filter", "click:brand", "click:{} filtered result"],
        )
        .template(
            "express",
            "purchase {} using express checkout",
            &[
                "click:search bar",
                "input",
                "click:{} top result",
                "click:add to cart",
                "click:go to cart",
                "click:checkout",
                "click:place order",
            ],
        )
        .build()
}

pub fn travel() -> Result<SimApp> {
    AppBuilder::new(TRAVEL, "home")
        .screen(
            "home",
            &[
                ("flights", "flight_search"),
                ("hotels", "hotel_search"),
                ("trains", "train_search"),
                ("my trips", "trips"),
                ("profile", "profile"),
            ],
        )
        .screen("flight_search", &[("destination field", "flight_dest")])
        .screen("flight_dest", &[("<input>", "flight_results")])
        .screen(
            "flight_results",
            &[("*{} earliest flight", "flight_detail"), ("sort by duration", "flight_sorted")],
        )
        .screen("flight_sorted", &[("{} shortest flight", "flight_detail")])
        .screen("flight_detail", &[("select seat", "seat_map"), ("book flight", "flight_pay")])
        .screen("seat_map", &[("window seat", "seat_chosen"), ("aisle seat", "seat_chosen")])
        .screen("seat_chosen", &[("confirm seat", "flight_pay")])
        .screen("flight_pay", &[("pay now", "booked")])
        .screen("booked", &[])
        .screen("hotel_search", &[("<input>", "hotel_results")])
        .screen(
            "hotel_results",
            &[("*{} top hotel", "hotel_detail"), ("<swipe:down>", "hotel_results_more")],
        )
        .screen("hotel_results_more", &[("{} budget hotel", "hotel_detail")])
        .screen("hotel_detail", &[("reserve room", "hotel_pay"), ("photos", "hotel_photos")])
        .screen("hotel_photos", &[("<swipe:left>", "hotel_photos_next")])
        .screen("hotel_photos_next", &[])
        .screen("hotel_pay", &[("pay now", "booked")])
        .screen("train_search", &[("<input>", "train_results")])
        .screen("train_results", &[("*{} next train", "train_detail")])
        .screen("train_detail", &[("buy ticket", "train_pay")])
        .screen("train_pay", &[("pay now", "booked")])
        .screen("trips", &[("search trips", "trip_search")])
        .screen("trip_search", &[("<input>", "trip_results")])
        .screen("trip_results", &[("{} trip", "trip_detail")])
        .screen("trip_detail", &[("cancel booking", "cancel_confirm"), ("check status", "trip_status")])
        .screen("cancel_confirm", &[("confirm cancellation", "cancelled")])
        .screen("cancelled", &[])
        .screen("trip_status", &[("<wait>", "trip_status_updated")])
        .screen("trip_status_updated", &[])
        .screen("profile", &[("settings", "settings")])
        .screen("settings", &[])
        .params(&[
            "new york",
            "los angeles",
            "san francisco",
            "las vegas",
            "hong kong",
            "buenos aires",
            "cape town",
            "abu dhabi",
            "kuala lumpur",
            "tel aviv",
        ])
        .template(
            "book_flight",
            "book flight to {}",
            &[
                "click:flights",
                "click:destination field",
                "input",
                "click:{} earliest flight",
                "click:book flight",
                "click:pay now",
            ],
        )
        .template(
            "window_seat",
            "fly to {} with window seat",
            &[
                "click:flights",
                "click:destination field",
                "input",
                "click:{} earliest flight",
                "click:select seat",
                "click:window seat",
                "click:confirm seat",
                "click:pay now",
            ],
        )
        .template(
            "shortest",
            "find shortest flights toward {}",
            &["click:flights", "click:destination field", "input", "click:sort by duration", "click:{} shortest flight"],
        )
        .template(
            "hotel",
            "reserve hotel in {}",
            &["click:hotels", "input", "click:{} top hotel", "click:reserve room", "click:pay now"],
        )
        .template(
            "photos",
            "browse {} hotel photos",
            &["click:hotels", "input", "click:{} top hotel", "click:photos", "swipe:left"],
        )
        .template(
            "budget",
            "cheap budget stay near {}",
            &["click:hotels", "input", "swipe:down", "click:{} budget hotel", "click:reserve room", "click:pay now"],
        )
        .template(
            "train",
            "get train ticket for {}",
            &["click:trains", "input", "click:{} next train", "click:buy ticket", "click:pay now"],
        )
        .template(
            "cancel",
            "cancel my {} trip",
            &[
                "click:my trips",
                "click:search trips",
                "input",
                "click:{} trip",
                "click:cancel booking",
                "click:confirm cancellation",
            ],
        )
        .template(
            "status",
            "check status of {} journey",
            &["click:my trips", "click:search trips", "input", "click:{} trip", "click:check status", "wait:5"],
        )
        .template(
            "options",
            "see {} flight options",
            &["click:flights", "click:destination field", "input"],
        )
        .build()
}

pub fn food() -> Result<SimApp> {
    AppBuilder::new(FOOD, "home")
        .screen(
            "home",
            &[
                ("search restaurants", "rest_search"),
                ("reorder", "past_orders"),
                ("*offers", "offers"),
                ("cart", "cart"),
                ("account", "account"),
            ],
        )
        .screen("rest_search", &[("<input>", "rest_results")])
        .screen(
            "rest_results",
            &[("*{} restaurant", "restaurant"), ("filter vegetarian", "veg_results")],
        )
        .screen("veg_results", &[("{} veggie spot", "restaurant")])
        .screen(
            "restaurant",
            &[
                ("popular dish", "dish"),
                ("menu", "menu"),
                ("reviews", "rest_reviews"),
                ("schedule delivery", "schedule"),
            ],
        )
        .screen("menu", &[("dessert section", "desserts"), ("<swipe:down>", "menu_more")])
        .screen("menu_more", &[("combo meal", "dish")])
        .screen("desserts", &[("chocolate cake", "dish")])
        .screen("dish", &[("add item", "dish_added")])
        .screen("dish_added", &[("view cart", "cart")])
        .screen("cart", &[("checkout", "checkout"), ("apply coupon", "coupon")])
        .screen("coupon", &[("<input>", "coupon_applied")])
        .screen("coupon_applied", &[("checkout", "checkout")])
        .screen("checkout", &[("place order", "placed")])
        .screen("placed", &[("<wait>", "tracking")])
        .screen("tracking", &[])
        .screen("past_orders", &[("search past orders", "past_search")])
        .screen("past_search", &[("<input>", "past_results")])
        .screen("past_results", &[("{} past order", "past_detail")])
        .screen("past_detail", &[("order again", "cart"), ("rate order", "rating")])
        .screen("rating", &[("five stars", "rated")])
        .screen("rated", &[])
        .screen("rest_reviews", &[("<swipe:down>", "rest_reviews_more")])
        .screen("rest_reviews_more", &[])
        .screen("schedule", &[("tomorrow noon", "scheduled")])
        .screen("scheduled", &[])
        .screen("offers", &[])
        .screen("account", &[])
        .params(&[
            "golden dragon",
            "pizza palace",
            "taco fiesta",
            "sushi corner",
            "burger barn",
            "curry house",
            "noodle shack",
            "pasta garden",
            "falafel king",
            "pho saigon",
        ])
        .template(
            "popular",
            "order popular dish from {}",
            &[
                "click:search restaurants",
                "input",
                "click:{} restaurant",
                "click:popular dish",
                "click:add item",
                "click:view cart",
                "click:checkout",
                "click:place order",
            ],
        )
        .template(
            "dessert",
            "get dessert at {}",
            &[
                "click:search restaurants",
                "input",
                "click:{} restaurant",
                "click:menu",
                "click:dessert section",
                "click:chocolate cake",
                "click:add item",
            ],
        )
        .template(
            "reviews",
            "read {} customer reviews",
            &["click:search restaurants", "input", "click:{} restaurant", "click:reviews", "swipe:down"],
        )
        .template(
            "vegetarian",
            "vegetarian meal near {}",
            &[
                "click:search restaurants",
                "input",
                "click:filter vegetarian",
                "click:{} veggie spot",
                "click:popular dish",
                "click:add item",
            ],
        )
        .template(
            "schedule",
            "schedule {} delivery tomorrow",
            &[
                "click:search restaurants",
                "input",
                "click:{} restaurant",
                "click:schedule delivery",
                "click:tomorrow noon",
            ],
        )
        .template(
            "combo",
            "grab {} combo special",
            &[
                "click:search restaurants",
                "input",
                "click:{} restaurant",
                "click:menu",
                "swipe:down",
                "click:combo meal",
                "click:add item",
            ],
        )
        .template(
            "repeat",
            "repeat previous {} purchase",
            &[
                "click:reorder",
                "click:search past orders",
                "input",
                "click:{} past order",
                "click:order again",
                "click:checkout",
                "click:place order",
            ],
        )
        .template(
            "rate",
            "rate recent {} experience",
            &["click:reorder", "click:search past orders", "input", "click:{} past order", "click:rate order", "click:five stars"],
        )
        .template(
            "coupon",
            "apply discount code with {}",
            &[
                "click:search restaurants",
                "input",
                "click:{} restaurant",
                "click:popular dish",
                "click:add item",
                "click:view cart",
                "click:apply coupon",
                "input:welcome bonus",
                "click:checkout",
                "click:place order",
            ],
        )
        .template(
            "track",
            "track {} order status",
            &[
                "click:search restaurants",
                "input",
                "click:{} restaurant",
                "click:popular dish",
                "click:add item",
                "click:view cart",
                "click:checkout",
                "click:place order",
                "wait:10",
            ],
        )
        .build()
}

/// Shopping, travel and food delivery, in that order.
pub fn builtin_apps() -> Result<Vec<SimApp>> {
    Ok(vec![shopping()?, travel()?, food()?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn apps_are_desk_sized() {
        for app in builtin_apps().unwrap() {
            assert!((15..=40).contains(&app.screens.len()), "{} has {}", app.app_id, app.screens.len());
            assert_eq!(app.templates.len(), 10);
            assert!(app.templates.iter().all(|t| t.params.len() == 10));
        }
    }

    #[test]
    fn descriptions_follow_the_token_budget() {
        for app in builtin_apps().unwrap() {
            let mut param_tokens = BTreeSet::new();
            for p in &app.templates[0].params {
                let toks: Vec<&str> = p.split(' ').collect();
                assert_eq!(toks.len(), 2, "{p}");
                for t in toks {
                    assert!(param_tokens.insert(t.to_string()), "{t} repeats");
                }
            }
            for t in &app.templates {
                let fixed: Vec<&str> = t.pattern.split(' ').filter(|w| *w != "{}").collect();
                let uniq: BTreeSet<&str> = fixed.iter().copied().collect();
                assert!(fixed.len() <= 5 && uniq.len() == fixed.len(), "{}", t.pattern);
                assert!(uniq.iter().all(|w| !param_tokens.contains(*w)), "{}", t.pattern);
            }
        }
    }

    #[test]
    fn ground_truth_states_never_repeat() {
        for app in builtin_apps().unwrap() {
            for t in &app.templates {
                for p in &t.params {
                    let (actions, states) = app.ground_truth(t, p).unwrap();
                    assert_eq!(actions.len(), states.len());
                    let uniq: BTreeSet<_> = states.iter().collect();
                    assert_eq!(uniq.len(), states.len(), "{} {p}", t.template_id);
                }
            }
        }
    }
}
