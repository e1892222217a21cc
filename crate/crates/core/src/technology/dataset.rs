use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::market::{EntryRule, MarketConfig, ProxyColumn};
use super::{profit_oracle, TechnologySpec};
use crate::error::{Error, Result};

/// One firm in one market.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    pub market_id: u64,
    /// Hidden productivity type, present only in debug data.
    pub type_e: Option<usize>,
    pub y_restricted: Vec<f64>,
    /// Observed price or proxy per good.
    pub x: Vec<f64>,
    pub is_price: Vec<bool>,
    pub noisy_profit: f64,
    /// Simulator truth, never serialized.
    pub true_prices: Option<Vec<f64>>,
    pub true_profit: Option<f64>,
}

/// A collection of records sharing a column layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub num_restricted: usize,
    pub num_goods: usize,
    pub records: Vec<ObservationRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn header(&self, debug: bool) -> Vec<String> {
        let mut h = vec!["market_id".to_string()];
        h.extend((1..=self.num_restricted).map(|i| format!("y_restricted_{i}")));
        h.extend((1..=self.num_goods).map(|i| format!("x_{i}")));
        h.extend((1..=self.num_goods).map(|i| format!("is_price_{i}")));
        h.push("noisy_profit".into());
        if debug {
            h.push("type_e".into());
        }
        h
    }

    /// Writes CSV; the hidden type column is included only when `debug` is set.
    pub fn write_csv<W: Write>(&self, out: W, debug: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header(debug))?;
        for r in &self.records {
            let mut row = vec![r.market_id.to_string()];
            row.extend(r.y_restricted.iter().map(f64::to_string));
            row.extend(r.x.iter().map(f64::to_string));
            row.extend(r.is_price.iter().map(|b| u8::from(*b).to_string()));
            row.push(r.noisy_profit.to_string());
            if debug {
                let e = r
                    .type_e
                    .ok_or_else(|| Error::Schema("debug output needs type labels".into()))?;
                row.push(e.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("market_id") {
            return Err(Error::Schema("first column must be market_id".into()));
        }
        let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
        let k = count("y_restricted_");
        let d = count("x_");
        if d == 0 || count("is_price_") != d {
            return Err(Error::Schema("need matching x_j and is_price_j columns".into()));
        }
        let expected = Dataset {
            num_restricted: k,
            num_goods: d,
            records: Vec::new(),
        };
        let debug = header.last().map(String::as_str) == Some("type_e");
        if header != expected.header(debug) {
            return Err(Error::Schema(format!("unexpected header {header:?}")));
        }
        let parse = |s: &str, col: usize| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("column {} value {s:?} is not a number", header[col])))
        };
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let market_id = row[0]
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Schema(format!("bad market_id {:?}", &row[0])))?;
            let mut c = 1;
            let mut take = |n: usize| -> Result<Vec<f64>> {
                let v = (c..c + n).map(|i| parse(&row[i], i)).collect();
                c += n;
                v
            };
            let y_restricted = take(k)?;
            let x = take(d)?;
            let flags = take(d)?;
            let noisy_profit = take(1)?[0];
            if flags.iter().any(|f| *f != 0.0 && *f != 1.0) {
                return Err(Error::Schema("is_price flags must be 0 or 1".into()));
            }
            let type_e = if debug {
                Some(row[c].trim().parse::<usize>().map_err(|_| {
                    Error::Schema(format!("bad type label {:?}", &row[c]))
                })?)
            } else {
                None
            };
            records.push(ObservationRecord {
                market_id,
                type_e,
                y_restricted,
                x,
                is_price: flags.iter().map(|f| *f == 1.0).collect(),
                noisy_profit,
                true_prices: None,
                true_profit: None,
            });
        }
        Ok(Dataset {
            num_restricted: k,
            num_goods: d,
            records,
        })
    }
}

fn enters(rule: &EntryRule, e: usize, profit: f64, shift: f64) -> bool {
    match rule {
        EntryRule::AllEnter => true,
        EntryRule::NonnegativeProfit => profit >= 0.0,
        EntryRule::ThresholdByType { thresholds, .. } => profit >= thresholds[e - 1] + shift,
    }
}

fn market_records(
    tech: &TechnologySpec,
    cfg: &MarketConfig,
    types: &WeightedIndex<f64>,
    market_id: u64,
) -> Result<Vec<ObservationRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(market_id);
    let prices = cfg.price_law.draw(&mut rng);
    let y_restricted = cfg.draw_restricted(&mut rng);
    let shift = match &cfg.entry_rule {
        EntryRule::ThresholdByType { market_shift, .. } if *market_shift > 0.0 => {
            rand::Rng::random_range(&mut rng, 0.0..*market_shift)
        }
        _ => 0.0,
    };
    let y_r = (!y_restricted.is_empty()).then_some(y_restricted.as_slice());
    let profits = (1..=tech.num_types())
        .map(|e| profit_oracle(tech, e, &prices, y_r).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;

    let mut x = Vec::with_capacity(prices.len());
    let mut is_price = Vec::with_capacity(prices.len());
    for (j, p) in prices.iter().enumerate() {
        match cfg.column(j) {
            ProxyColumn::Price => {
                x.push(*p);
                is_price.push(true);
            }
            ProxyColumn::Transform { map } => {
                x.push(map.inverse(*p)?);
                is_price.push(false);
            }
            ProxyColumn::AggregateDemand => {
                let d = cfg.demand_side[j].as_ref().expect("validated");
                x.push(d.eval(*p));
                is_price.push(false);
            }
        }
    }

    let mut out = Vec::new();
    for _ in 0..cfg.firms_per_market {
        let e = types.sample(&mut rng) + 1;
        let noise = cfg.noise.draw(&mut rng);
        let profit = profits[e - 1];
        if !enters(&cfg.entry_rule, e, profit, shift) {
            continue;
        }
        out.push(ObservationRecord {
            market_id,
            type_e: Some(e),
            y_restricted: y_restricted.clone(),
            x: x.clone(),
            is_price: is_price.clone(),
            noisy_profit: profit + noise,
            true_prices: Some(prices.clone()),
            true_profit: Some(profit),
        });
    }
    out.sort_by_key(|r| r.type_e);
    Ok(out)
}

/// Simulates firms market by market; deterministic in `cfg.seed`.
pub fn generate_dataset(tech: &TechnologySpec, cfg: &MarketConfig) -> Result<Dataset> {
    tech.validate()?;
    cfg.validate(tech.num_types(), tech.dim(), tech.num_restricted())?;
    let weights = if cfg.type_weights.is_empty() {
        vec![1.0; tech.num_types()]
    } else {
        cfg.type_weights.clone()
    };
    let types = WeightedIndex::new(&weights).map_err(|e| Error::config(e.to_string()))?;
    let per_market = (0..cfg.num_markets as u64)
        .into_par_iter()
        .map(|m| market_records(tech, cfg, &types, m))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<ObservationRecord> = per_market.into_iter().flatten().collect();
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset {
        num_restricted: tech.num_restricted(),
        num_goods: tech.dim(),
        records,
    })
}
