use crate::error::{Error, Result};
use std::io::{Read, Write};

/// Default style vocabulary.
pub const DEFAULT_STYLES: [&str; 27] = [
    "Abstract Expressionism",
    "Action painting",
    "Analytical Cubism",
    "Art Nouveau",
    "Baroque",
    "Color Field Painting",
    "Contemporary Realism",
    "Cubism",
    "Early Renaissance",
    "Expressionism",
    "Fauvism",
    "High Renaissance",
    "Impressionism",
    "Mannerism Late Renaissance",
    "Minimalism",
    "Naive Art Primitivism",
    "New Realism",
    "Northern Renaissance",
    "Pointillism",
    "Pop Art",
    "Post Impressionism",
    "Realism",
    "Rococo",
    "Romanticism",
    "Symbolism",
    "Synthetic Cubism",
    "Ukiyo-e",
];

/// Default genre vocabulary, used for evaluation only.
pub const DEFAULT_GENRES: [&str; 10] = [
    "abstract painting",
    "cityscape",
    "genre painting",
    "illustration",
    "landscape",
    "nude painting",
    "portrait",
    "religious painting",
    "sketch and study",
    "still life",
];

/// Id-to-name table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTable {
    pub names: Vec<String>,
}

impl LabelTable {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            names: names.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    pub fn default_styles() -> Self {
        Self::from_names(&DEFAULT_STYLES)
    }

    pub fn default_genres() -> Self {
        Self::from_names(&DEFAULT_GENRES)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Reads `id,name` rows; ids must be exactly `0..n` in order.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut names = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            if row.len() != 2 {
                return Err(Error::Config(format!("label row {}: expected 2 columns", i + 1)));
            }
            let id: usize = row[0]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("label row {}: bad id {:?}", i + 1, &row[0])))?;
            if id != i {
                return Err(Error::Config(format!("label row {}: expected id {i}, got {id}", i + 1)));
            }
            names.push(row[1].to_string());
        }
        Ok(Self { names })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["id", "name"])?;
        for (i, n) in self.names.iter().enumerate() {
            wtr.write_record([i.to_string().as_str(), n])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
