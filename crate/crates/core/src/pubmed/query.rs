use thiserror::Error;

/// Largest `retmax` the E-utilities service accepts.
pub const MAX_PAGE_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("journal name is empty")]
    EmptyJournalName,
    #[error("page size {0} outside 1..={MAX_PAGE_SIZE}")]
    BadPageSize(usize),
}

/// Search term selecting one journal's articles from `min_year` on.
pub fn build_journal_query(journal_name: &str, min_year: i32) -> Result<String, QueryError> {
    let name = journal_name.trim();
    if name.is_empty() {
        return Err(QueryError::EmptyJournalName);
    }
    Ok(format!("\"{name}\"[Journal] AND {min_year}:3000[dp]"))
}

/// One page of a journal search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalQuery {
    pub journal_name: String,
    pub min_year: i32,
    pub page_size: usize,
    pub page_offset: usize,
}

impl JournalQuery {
    pub fn new(journal_name: &str, min_year: i32, page_size: usize) -> Result<Self, QueryError> {
        if journal_name.trim().is_empty() {
            return Err(QueryError::EmptyJournalName);
        }
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(QueryError::BadPageSize(page_size));
        }
        Ok(JournalQuery {
            journal_name: journal_name.trim().to_string(),
            min_year,
            page_size,
            page_offset: 0,
        })
    }

    pub fn term(&self) -> String {
        build_journal_query(&self.journal_name, self.min_year).expect("validated at construction")
    }

    pub fn at_offset(&self, page_offset: usize) -> Self {
        JournalQuery {
            page_offset,
            ..self.clone()
        }
    }

    /// Page token used in cache keys.
    pub fn page_token(&self) -> String {
        format!("{}:{}", self.page_offset, self.page_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_template() {
        assert_eq!(
            build_journal_query("Circulation", 2010).unwrap(),
            "\"Circulation\"[Journal] AND 2010:3000[dp]"
        );
        assert_eq!(
            build_journal_query("Gut", 2015).unwrap(),
            "\"Gut\"[Journal] AND 2015:3000[dp]"
        );
        assert_eq!(
            build_journal_query("", 2010),
            Err(QueryError::EmptyJournalName)
        );
        assert_eq!(
            build_journal_query("   ", 2010),
            Err(QueryError::EmptyJournalName)
        );
    }

    #[test]
    fn page_size_bounds() {
        assert!(JournalQuery::new("Gut", 2010, 10_000).is_ok());
        assert_eq!(
            JournalQuery::new("Gut", 2010, 10_001),
            Err(QueryError::BadPageSize(10_001))
        );
        assert_eq!(
            JournalQuery::new("Gut", 2010, 0),
            Err(QueryError::BadPageSize(0))
        );
        assert_eq!(
            JournalQuery::new("", 2010, 10),
            Err(QueryError::EmptyJournalName)
        );
    }
}
