use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    /// 0 for positive, 1 for negative; the map order used by the codec.
    pub fn index(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// A single brightness-change event; `t` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u32,
    pub y: u32,
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u32, y: u32, t: u64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }
}

/// Events of one inter-frame interval split into `n_bins` equal time bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventVolume {
    pub bins: Vec<Vec<Event>>,
    pub t_start: u64,
    pub t_end: u64,
}

impl EventVolume {
    pub fn empty(t_start: u64, t_end: u64, n_bins: usize) -> Self {
        Self { bins: vec![Vec::new(); n_bins], t_start, t_end }
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn len(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(Vec::is_empty)
    }

    /// Bin-major concatenation; inverse of [`bin_events`] on sorted input.
    pub fn flatten(&self) -> Vec<Event> {
        self.bins.iter().flatten().copied().collect()
    }

    /// Iterator of `(bin, event)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Event)> {
        self.bins.iter().enumerate().flat_map(|(b, evs)| evs.iter().map(move |e| (b, e)))
    }
}

/// Bin index of `t` within `[t_start, t_end)` split into `n_bins`.
#[inline]
pub fn bin_index(t: u64, t_start: u64, t_end: u64, n_bins: usize) -> usize {
    ((n_bins as u128 * (t - t_start) as u128) / (t_end - t_start) as u128) as usize
}

pub fn bin_events(events: &[Event], t_start: u64, t_end: u64, n_bins: usize) -> Result<EventVolume> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be at least 1".into()));
    }
    if t_end <= t_start {
        return Err(Error::InvalidArgument(format!("empty interval [{t_start}, {t_end})")));
    }
    let mut vol = EventVolume::empty(t_start, t_end, n_bins);
    for e in events {
        if e.t < t_start || e.t >= t_end {
            return Err(Error::EventOutsideInterval { t: e.t, start: t_start, end: t_end });
        }
        vol.bins[bin_index(e.t, t_start, t_end, n_bins)].push(*e);
    }
    Ok(vol)
}

/// Per-pixel event counts summed over bins and polarities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventCountMap {
    pub side: u32,
    pub counts: Vec<u32>,
}

impl EventCountMap {
    pub fn zeros(side: u32) -> Self {
        Self { side, counts: vec![0; side as usize * side as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.counts[y as usize * self.side as usize + x as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

pub fn aggregate_counts(volume: &EventVolume, side: u32) -> Result<EventCountMap> {
    let mut map = EventCountMap::zeros(side);
    for (_, e) in volume.iter() {
        if e.x >= side || e.y >= side {
            return Err(Error::EventOutsideFrame { x: e.x, y: e.y, side });
        }
        map.counts[e.y as usize * side as usize + e.x as usize] += 1;
    }
    Ok(map)
}

/// Text format: one `x y t p` per line, `p` in {1, -1}. Blank lines and `#`
/// comments are skipped.
pub fn read_events<R: BufRead>(r: R) -> Result<Vec<Event>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Parse { line: i + 1, reason: reason.to_owned() };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad("expected `x y t p`"));
        }
        let x = f[0].parse().map_err(|_| bad("bad x"))?;
        let y = f[1].parse().map_err(|_| bad("bad y"))?;
        let t = f[2].parse().map_err(|_| bad("bad t"))?;
        let p = f[3].parse::<i64>().ok().and_then(Polarity::from_sign).ok_or_else(|| bad("polarity must be 1 or -1"))?;
        out.push(Event { x, y, t, p });
    }
    if out.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Parse { line: 0, reason: "events are not sorted by timestamp".into() });
    }
    Ok(out)
}

pub fn write_events<W: Write>(mut w: W, events: &[Event]) -> Result<()> {
    for e in events {
        writeln!(w, "{} {} {} {}", e.x, e.y, e.t, e.p.sign())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(x: u32, y: u32, t: u64, p: Polarity) -> Event {
        Event::new(x, y, t, p)
    }

    #[test]
    fn empty_input_gives_empty_bins() {
        let v = bin_events(&[], 0, 100, 4).unwrap();
        assert_eq!(v.n_bins(), 4);
        assert!(v.is_empty());
    }

    #[test]
    fn uniform_partition() {
        let evs: Vec<_> = [0, 25, 50, 75].iter().map(|&t| ev(0, 0, t, Polarity::Positive)).collect();
        let v = bin_events(&evs, 0, 100, 4).unwrap();
        assert!(v.bins.iter().all(|b| b.len() == 1));
    }

    #[test]
    fn rejects_event_outside_interval() {
        let err = bin_events(&[ev(0, 0, 100, Polarity::Positive)], 0, 100, 4).unwrap_err();
        assert!(matches!(err, Error::EventOutsideInterval { t: 100, .. }));
        assert!(err.to_string().contains("t=100"));
    }

    #[test]
    fn random_populations_match_histogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (t0, t1, n) = (1_000u64, 34_333u64, 4usize);
        let mut evs: Vec<_> = (0..1000)
            .map(|_| ev(rng.random_range(0..16), rng.random_range(0..16), rng.random_range(t0..t1), Polarity::Negative))
            .collect();
        evs.sort_by_key(|e| e.t);
        let v = bin_events(&evs, t0, t1, n).unwrap();
        // independent histogram with floating-point bin edges
        let mut hist = [0usize; 4];
        for e in &evs {
            let width = (t1 - t0) as f64 / n as f64;
            let mut b = ((e.t - t0) as f64 / width).floor() as usize;
            // guard edge rounding: bin edges are t0 + k*width
            while b > 0 && (e.t as f64) < t0 as f64 + b as f64 * width {
                b -= 1;
            }
            while b + 1 < n && (e.t as f64) >= t0 as f64 + (b + 1) as f64 * width {
                b += 1;
            }
            hist[b] += 1;
        }
        let pops: Vec<usize> = v.bins.iter().map(Vec::len).collect();
        assert_eq!(pops, hist.to_vec());
        assert_eq!(v.flatten(), evs);
    }

    #[test]
    fn aggregation_ignores_polarity() {
        let v = bin_events(&[ev(1, 1, 0, Polarity::Positive), ev(1, 1, 10, Polarity::Negative)], 0, 100, 4).unwrap();
        let m = aggregate_counts(&v, 4).unwrap();
        assert_eq!(m.get(1, 1), 2);
        assert_eq!(m.total(), 2);
        assert_eq!(aggregate_counts(&EventVolume::empty(0, 1, 4), 4).unwrap().total(), 0);
    }

    #[test]
    fn aggregation_matches_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut evs: Vec<_> = (0..500)
            .map(|_| {
                let p = if rng.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
                ev(rng.random_range(0..8), rng.random_range(0..8), rng.random_range(0..1000), p)
            })
            .collect();
        evs.sort_by_key(|e| e.t);
        let m = aggregate_counts(&bin_events(&evs, 0, 1000, 4).unwrap(), 8).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let tally = evs.iter().filter(|e| e.x == x && e.y == y).count() as u32;
                assert_eq!(m.get(x, y), tally);
            }
        }
        assert_eq!(m.total(), 500);
    }

    #[test]
    fn text_round_trip() {
        let evs = vec![ev(1, 2, 3, Polarity::Positive), ev(4, 5, 6, Polarity::Negative)];
        let mut buf = Vec::new();
        write_events(&mut buf, &evs).unwrap();
        assert_eq!(std::str::from_utf8(&buf).unwrap(), "1 2 3 1\n4 5 6 -1\n");
        assert_eq!(read_events(&buf[..]).unwrap(), evs);
        assert!(read_events(&b"1 2 3 0\n"[..]).is_err());
    }
}
