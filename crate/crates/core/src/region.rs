//! The four dielectric regions of a coplanar-waveguide resonator and a
//! fixed-size container keyed by them.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A dielectric region. The declaration order (MS, SA, MA, Si) is the
/// canonical order for matrix columns and every serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Metal-substrate interface.
    MS,
    /// Substrate-air interface.
    SA,
    /// Metal-air interface.
    MA,
    /// Bulk silicon substrate.
    Si,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::MS, Region::SA, Region::MA, Region::Si];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::MS => "MS",
            Region::SA => "SA",
            Region::MA => "MA",
            Region::Si => "Si",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Region::MS => "metal-substrate interface",
            Region::SA => "substrate-air interface",
            Region::MA => "metal-air interface",
            Region::Si => "silicon substrate",
        }
    }

    /// Decimal exponent used when tabulating loss tangents for humans
    /// (MS ×10⁻⁴, SA ×10⁻³, MA ×10⁻³, Si ×10⁻⁷).
    pub fn display_exponent(self) -> i32 {
        match self {
            Region::MS => -4,
            Region::SA => -3,
            Region::MA => -3,
            Region::Si => -7,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown region `{0}` (expected one of MS, SA, MA, Si)")]
pub struct UnknownRegion(pub String);

impl FromStr for Region {
    type Err = UnknownRegion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "MS" | "ms" => Ok(Region::MS),
            "SA" | "sa" => Ok(Region::SA),
            "MA" | "ma" => Ok(Region::MA),
            "Si" | "SI" | "si" => Ok(Region::Si),
            other => Err(UnknownRegion(other.to_string())),
        }
    }
}

/// One value per region, stored in canonical order.
///
/// Serializes as a map `{"MS": .., "SA": .., "MA": .., "Si": ..}` so the
/// on-disk key order never depends on hashing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegionArray<T>(pub [T; 4]);

impl<T> RegionArray<T> {
    pub fn from_fn(mut f: impl FnMut(Region) -> T) -> Self {
        RegionArray([
            f(Region::MS),
            f(Region::SA),
            f(Region::MA),
            f(Region::Si),
        ])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Region, &T)> {
        Region::ALL.into_iter().zip(self.0.iter())
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.0.iter()
    }

    pub fn map<U>(&self, mut f: impl FnMut(Region, &T) -> U) -> RegionArray<U> {
        RegionArray::from_fn(|r| f(r, &self[r]))
    }

    pub fn as_array(&self) -> &[T; 4] {
        &self.0
    }
}

impl RegionArray<f64> {
    pub fn splat(v: f64) -> Self {
        RegionArray([v; 4])
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn dot(&self, other: &RegionArray<f64>) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }
}

impl<T> Index<Region> for RegionArray<T> {
    type Output = T;

    fn index(&self, r: Region) -> &T {
        &self.0[r.index()]
    }
}

impl<T> IndexMut<Region> for RegionArray<T> {
    fn index_mut(&mut self, r: Region) -> &mut T {
        &mut self.0[r.index()]
    }
}

impl<T> From<[T; 4]> for RegionArray<T> {
    fn from(a: [T; 4]) -> Self {
        RegionArray(a)
    }
}

impl<T: Serialize> Serialize for RegionArray<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        for (r, v) in self.iter() {
            map.serialize_entry(r.label(), v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for RegionArray<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RegionMapVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for RegionMapVisitor<T> {
            type Value = RegionArray<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map with keys MS, SA, MA, Si")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut slots: [Option<T>; 4] = [None, None, None, None];
                while let Some(key) = access.next_key::<String>()? {
                    let region: Region = key.parse().map_err(de::Error::custom)?;
                    if slots[region.index()].is_some() {
                        return Err(de::Error::custom(format!("duplicate region `{region}`")));
                    }
                    slots[region.index()] = Some(access.next_value()?);
                }
                let [ms, sa, ma, si] = slots;
                let take = |v: Option<T>, r: Region| {
                    v.ok_or_else(|| de::Error::custom(format!("missing region `{r}`")))
                };
                Ok(RegionArray([
                    take(ms, Region::MS)?,
                    take(sa, Region::SA)?,
                    take(ma, Region::MA)?,
                    take(si, Region::Si)?,
                ]))
            }
        }

        deserializer.deserialize_map(RegionMapVisitor(std::marker::PhantomData))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order() {
        assert_eq!(Region::ALL.map(|r| r.index()), [0, 1, 2, 3]);
        assert!(Region::MS < Region::SA && Region::MA < Region::Si);
    }

    #[test]
    fn parse_round_trip() {
        for r in Region::ALL {
            assert_eq!(r.label().parse::<Region>().unwrap(), r);
        }
        assert!("XX".parse::<Region>().is_err());
    }

    #[test]
    fn serialized_key_order_is_canonical() {
        let a = RegionArray([1.0, 2.0, 3.0, 4.0]);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"MS":1.0,"SA":2.0,"MA":3.0,"Si":4.0}"#);
        // key order on input does not matter
        let back: RegionArray<f64> =
            serde_json::from_str(r#"{"Si":4.0,"MA":3.0,"SA":2.0,"MS":1.0}"#).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn missing_or_unknown_keys_rejected() {
        assert!(serde_json::from_str::<RegionArray<f64>>(r#"{"MS":1,"SA":2,"MA":3}"#).is_err());
        assert!(
            serde_json::from_str::<RegionArray<f64>>(r#"{"MS":1,"SA":2,"MA":3,"Si":4,"XX":5}"#)
                .is_err()
        );
    }
}
