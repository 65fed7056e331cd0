#include "fixtures.hpp"

#include <filesystem>
#include <set>

#include "sqlrefine/db.hpp"
#include "sqlrefine/parser.hpp"

namespace sqlrefine::testutil {

namespace fs = std::filesystem;

namespace {

void build_campus(const std::string& path) {
    if (fs::exists(path)) fs::remove(path);
    Db db = Db::open_readwrite(path);
    db.exec(R"sql(
CREATE TABLE student (id INTEGER PRIMARY KEY, name TEXT, age INTEGER, gpa REAL);
CREATE TABLE course (id INTEGER PRIMARY KEY, name TEXT, credits INTEGER, department TEXT);
CREATE TABLE enrollment (id INTEGER PRIMARY KEY, student_id INTEGER REFERENCES student(id),
                         course_id INTEGER REFERENCES course(id), status TEXT, grade REAL);
CREATE TABLE waitlist (id INTEGER PRIMARY KEY, student_id INTEGER REFERENCES student(id),
                       course_id INTEGER REFERENCES course(id), status TEXT, grade REAL);
INSERT INTO student VALUES
  (1,'Alice',22,3.9),(2,'Bob',20,3.1),(3,'Carol',25,3.5),
  (4,'Dave',19,2.8),(5,'Eve',21,3.7),(6,'Frank',23,2.5);
INSERT INTO course VALUES
  (1,'Database',4,'CS'),(2,'Algorithms',3,'CS'),(3,'Calculus',4,'Math'),
  (4,'Statistics',3,'Math'),(5,'Poetry',2,'English');
INSERT INTO enrollment VALUES
  (1,1,1,'Completed',91.5),(2,1,2,'Active',NULL),(3,2,1,'Completed',78.0),
  (4,2,3,'Withdrawn',NULL),(5,3,1,'Active',NULL),(6,3,4,'Completed',85.0),
  (7,4,5,'Active',NULL),(8,5,1,'Completed',88.0),(9,5,2,'Completed',95.0);
INSERT INTO waitlist VALUES
  (1,2,2,'Pending',NULL),(2,6,1,'Pending',NULL),(3,4,1,'Expired',NULL);
)sql");
}

void build_library(const std::string& path) {
    if (fs::exists(path)) fs::remove(path);
    Db db = Db::open_readwrite(path);
    db.exec(R"sql(
CREATE TABLE author (id INTEGER PRIMARY KEY, name TEXT, country TEXT, birth_year INTEGER);
CREATE TABLE book (id INTEGER PRIMARY KEY, title TEXT, author_id INTEGER REFERENCES author(id),
                   year INTEGER, pages INTEGER, genre TEXT);
CREATE TABLE archive_book (id INTEGER PRIMARY KEY, title TEXT, author_id INTEGER,
                           year INTEGER, pages INTEGER, genre TEXT);
CREATE TABLE loan (id INTEGER PRIMARY KEY, book_id INTEGER REFERENCES book(id),
                   member TEXT, due_date TEXT, status TEXT);
INSERT INTO author VALUES
  (1,'Orwell','UK',1903),(2,'Woolf','UK',1882),(3,'Tolstoy','Russia',1828),
  (4,'Austen','UK',1775),(5,'Twain','USA',1835);
INSERT INTO book VALUES
  (1,'1984',1,1949,328,'Dystopia'),(2,'Animal Farm',1,1945,112,'Satire'),
  (3,'Mrs Dalloway',2,1925,194,'Modernist'),(4,'War and Peace',3,1869,1225,'Historical'),
  (5,'Emma',4,1815,474,'Romance'),(6,'Persuasion',4,1817,249,'Romance');
INSERT INTO archive_book VALUES
  (1,'Old Tome',2,1700,99,'Ancient'),(2,'Scrolls',3,1500,45,'Ancient');
INSERT INTO loan VALUES
  (1,1,'m1','2024-01-15','Returned'),(2,1,'m2','2024-02-20','Overdue'),
  (3,3,'m3','2024-03-05','Returned'),(4,5,'m1','2024-04-10','Active');
)sql");
}

void build_shop(const std::string& path) {
    if (fs::exists(path)) fs::remove(path);
    Db db = Db::open_readwrite(path);
    db.exec(R"sql(
CREATE TABLE customer (id INTEGER PRIMARY KEY, name TEXT, city TEXT, segment TEXT);
CREATE TABLE product (id INTEGER PRIMARY KEY, name TEXT, category TEXT, price REAL,
                      stock INTEGER);
CREATE TABLE orders (id INTEGER PRIMARY KEY, customer_id INTEGER REFERENCES customer(id),
                     order_date TEXT, status TEXT);
CREATE TABLE invoice (id INTEGER PRIMARY KEY, customer_id INTEGER,
                      order_date TEXT, status TEXT);
CREATE TABLE order_item (id INTEGER PRIMARY KEY, order_id INTEGER REFERENCES orders(id),
                         product_id INTEGER REFERENCES product(id), quantity INTEGER,
                         unit_price REAL);
INSERT INTO customer VALUES
  (1,'Acme Corp','Berlin','Corporate'),(2,'Jane Roe','Berlin','Retail'),
  (3,'John Doe','Paris','Retail'),(4,'Globex','Madrid','Corporate'),
  (5,'Initech','Paris','Corporate');
INSERT INTO product VALUES
  (1,'Laptop','Electronics',999.5,12),(2,'Mouse','Electronics',25.0,80),
  (3,'Notebook','Stationery',3.5,200),(4,'Pen','Stationery',1.2,500),
  (5,'Monitor','Electronics',199.0,7),(6,'Stapler','Stationery',8.9,40);
INSERT INTO orders VALUES
  (1,1,'2024-03-01','Shipped'),(2,1,'2024-03-07','Pending'),
  (3,2,'2024-03-01','Delivered'),(4,3,'2024-04-02','Shipped'),
  (5,4,'2024-04-15','Pending');
INSERT INTO invoice VALUES
  (1,2,'2024-02-01','Draft'),(2,4,'2024-02-11','Sent');
INSERT INTO order_item VALUES
  (1,1,1,1,999.5),(2,1,2,2,25.0),(3,2,3,3,3.5),(4,3,4,10,1.2),
  (5,4,5,1,199.0),(6,4,2,1,25.0),(7,5,6,2,8.9);
)sql");
}

std::vector<GoldSample> gold_corpus() {
    std::vector<std::pair<std::string, std::string>> campus = {
        {"Find the names of students who have completed their enrollment",
         "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id WHERE "
         "e.status = 'Completed'"},
        {"List the names of students that are enrolled in anything",
         "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id"},
        {"Show names and ages of students older than 20",
         "SELECT s.name, s.age FROM student AS s WHERE s.age > 20"},
        {"Which distinct enrollment statuses exist",
         "SELECT DISTINCT e.status FROM enrollment AS e"},
        {"Count the courses per department",
         "SELECT c.department, COUNT(*) FROM course AS c GROUP BY c.department"},
        {"List student names in reverse alphabetical order",
         "SELECT s.name FROM student AS s ORDER BY s.name DESC"},
        {"What is the average grade over completed enrollments",
         "SELECT AVG(e.grade) FROM enrollment AS e WHERE e.status = 'Completed'"},
        {"List the names of courses in the CS department",
         "SELECT c.name FROM course AS c WHERE c.department = 'CS'"},
        {"Find names of students with an active enrollment",
         "SELECT s.name FROM student AS s WHERE s.id IN (SELECT e.student_id FROM enrollment "
         "AS e WHERE e.status = 'Active')"},
        {"Show the two courses with the most credits",
         "SELECT c.name, c.credits FROM course AS c ORDER BY c.credits DESC LIMIT 2"},
        {"How many enrollments were withdrawn",
         "SELECT COUNT(*) FROM enrollment AS e WHERE e.status = 'Withdrawn'"},
        {"List student names with their recorded grades",
         "SELECT s.name, e.grade FROM student AS s JOIN enrollment AS e ON s.id = "
         "e.student_id WHERE e.grade IS NOT NULL"},
        {"Which departments average more than 2.5 credits per course",
         "SELECT c.department, AVG(c.credits) FROM course AS c GROUP BY c.department HAVING "
         "AVG(c.credits) > 2.5"},
        {"Find the names of students taking the Database course",
         "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id JOIN "
         "course AS c ON e.course_id = c.id WHERE c.name = 'Database'"},
        {"What is the highest grade point average among students",
         "SELECT MAX(s.gpa) FROM student AS s"},
        {"Which students have a gpa between 3.0 and 3.8",
         "SELECT s.name FROM student AS s WHERE s.gpa BETWEEN 3.0 AND 3.8"},
        {"List four-credit courses alphabetically",
         "SELECT c.name FROM course AS c WHERE c.credits = 4 ORDER BY c.name ASC"},
        {"Which distinct departments offer courses",
         "SELECT DISTINCT c.department FROM course AS c"},
        {"Count enrollments per status",
         "SELECT e.status, COUNT(*) FROM enrollment AS e GROUP BY e.status"},
        {"Find students younger than 21 with gpa above 3.0",
         "SELECT s.name FROM student AS s WHERE s.age < 21 AND s.gpa > 3.0"},
    };
    std::vector<std::pair<std::string, std::string>> library = {
        {"List the titles of romance books",
         "SELECT b.title FROM book AS b WHERE b.genre = 'Romance'"},
        {"Which authors published a book after 1900",
         "SELECT a.name FROM author AS a JOIN book AS b ON a.id = b.author_id WHERE b.year > "
         "1900"},
        {"List book titles with their page counts, longest first",
         "SELECT b.title, b.pages FROM book AS b ORDER BY b.pages DESC"},
        {"How many loans were returned",
         "SELECT COUNT(*) FROM loan AS l WHERE l.status = 'Returned'"},
        {"Count the authors per country",
         "SELECT a.country, COUNT(*) FROM author AS a GROUP BY a.country"},
        {"Which book titles are on overdue loans",
         "SELECT b.title FROM book AS b JOIN loan AS l ON b.id = l.book_id WHERE l.status = "
         "'Overdue'"},
        {"Which distinct genres are in the collection",
         "SELECT DISTINCT b.genre FROM book AS b"},
        {"Name the authors born before 1850",
         "SELECT a.name FROM author AS a WHERE a.birth_year < 1850"},
        {"What is the average page count of romance books",
         "SELECT AVG(b.pages) FROM book AS b WHERE b.genre = 'Romance'"},
        {"List titles of books written by UK authors",
         "SELECT b.title FROM book AS b WHERE b.author_id IN (SELECT a.id FROM author AS a "
         "WHERE a.country = 'UK')"},
        {"Count the books per author name",
         "SELECT a.name, COUNT(*) FROM author AS a JOIN book AS b ON a.id = b.author_id "
         "GROUP BY a.name"},
        {"List nineteenth century books by year",
         "SELECT b.title FROM book AS b WHERE b.year BETWEEN 1800 AND 1900 ORDER BY b.year "
         "ASC"},
        {"Which members borrowed the book titled 1984",
         "SELECT l.member FROM loan AS l JOIN book AS b ON l.book_id = b.id WHERE b.title = "
         "'1984'"},
        {"What is the earliest publication year",
         "SELECT MIN(b.year) FROM book AS b"},
        {"Find the longest book per genre",
         "SELECT b.genre, MAX(b.pages) FROM book AS b GROUP BY b.genre"},
        {"List author names that have books in the collection",
         "SELECT a.name FROM author AS a JOIN book AS b ON a.id = b.author_id"},
    };
    std::vector<std::pair<std::string, std::string>> shop = {
        {"List the names of electronics products",
         "SELECT p.name FROM product AS p WHERE p.category = 'Electronics'"},
        {"Which customers have a shipped order",
         "SELECT c.name FROM customer AS c JOIN orders AS o ON c.id = o.customer_id WHERE "
         "o.status = 'Shipped'"},
        {"Count products per category",
         "SELECT p.category, COUNT(*) FROM product AS p GROUP BY p.category"},
        {"Show the three most expensive products",
         "SELECT p.name, p.price FROM product AS p ORDER BY p.price DESC LIMIT 3"},
        {"How many orders are pending",
         "SELECT COUNT(*) FROM orders AS o WHERE o.status = 'Pending'"},
        {"Which distinct cities do customers live in",
         "SELECT DISTINCT c.city FROM customer AS c"},
        {"Name the corporate segment customers",
         "SELECT c.name FROM customer AS c WHERE c.segment = 'Corporate'"},
        {"What is the total quantity across order items",
         "SELECT SUM(oi.quantity) FROM order_item AS oi"},
        {"List cheap well-stocked products",
         "SELECT p.name FROM product AS p WHERE p.price < 50 AND p.stock > 10"},
        {"Which customers placed any order",
         "SELECT c.name FROM customer AS c JOIN orders AS o ON c.id = o.customer_id"},
        {"Count orders per status",
         "SELECT o.status, COUNT(*) FROM orders AS o GROUP BY o.status"},
        {"Which products were ordered more than once in a line",
         "SELECT p.name FROM product AS p WHERE p.id IN (SELECT oi.product_id FROM "
         "order_item AS oi WHERE oi.quantity > 1)"},
        {"What is the average price of stationery",
         "SELECT AVG(p.price) FROM product AS p WHERE p.category = 'Stationery'"},
        {"Which cities have more than one customer",
         "SELECT c.city, COUNT(*) FROM customer AS c GROUP BY c.city HAVING COUNT(*) > 1"},
        {"Name products that appear with quantity two",
         "SELECT p.name FROM product AS p JOIN order_item AS oi ON p.id = oi.product_id "
         "WHERE oi.quantity = 2"},
        {"List order dates for the first of March 2024",
         "SELECT o.order_date FROM orders AS o WHERE o.order_date = '2024-03-01'"},
    };

    std::vector<GoldSample> corpus;
    auto push = [&](const std::string& db_id,
                    const std::vector<std::pair<std::string, std::string>>& rows) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            GoldSample sample;
            sample.question_id = db_id + "-" + std::to_string(i + 1);
            sample.db_id = db_id;
            sample.question = rows[i].first + " (sample " + sample.question_id + ")";
            sample.gold_sql = rows[i].second;
            corpus.push_back(std::move(sample));
        }
    };
    push("campus", campus);
    push("library", library);
    push("shop", shop);
    return corpus;
}

}  // namespace

Fixtures make_fixtures(const std::string& dir) {
    fs::create_directories(dir);
    Fixtures fixtures;
    fixtures.root_dir = dir;
    build_campus(dir + "/campus.sqlite");
    build_library(dir + "/library.sqlite");
    build_shop(dir + "/shop.sqlite");
    fixtures.corpus = gold_corpus();
    return fixtures;
}

std::string fresh_temp_dir(const std::string& tag) {
    static int counter = 0;
    std::string dir = (fs::temp_directory_path() /
                       ("sqlrefine_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++)))
                          .string();
    fs::create_directories(dir);
    return dir;
}

SchemaLinkingResult sl_from_sql(const SqlAst& gold_ast, const SchemaGraph& schema) {
    SchemaLinkingResult sl;
    std::set<std::string> tables;
    std::set<std::pair<std::string, std::string>> columns;
    for (const auto& ref : collect_schema_references(gold_ast)) {
        if (ref.kind == RefKind::table) {
            if (auto resolved = schema.resolve_table(ref.name)) tables.insert(*resolved);
        } else if (ref.kind == RefKind::column) {
            std::string table = resolve_qualifier(gold_ast, ref.qualifier.value_or(""));
            if (table.empty()) continue;
            if (auto resolved = schema.resolve_column(table, ref.name)) {
                columns.insert(*resolved);
            }
        }
    }
    sl.tables.assign(tables.begin(), tables.end());
    sl.columns.assign(columns.begin(), columns.end());
    return sl;
}

std::vector<std::string> parser_corpus() {
    std::vector<std::string> corpus;
    for (const auto& sample : gold_corpus()) corpus.push_back(sample.gold_sql);

    // enumerated feature matrix on the campus schema
    const std::vector<std::string> columns = {"s.name", "s.age", "s.gpa"};
    const std::vector<std::string> aggs = {"COUNT(*)", "AVG(s.gpa)", "MAX(s.age)",
                                           "MIN(s.age)", "SUM(s.gpa)"};
    const std::vector<std::string> wheres = {
        "",
        " WHERE s.age > 20",
        " WHERE s.name = 'Alice' OR s.age < 21",
        " WHERE s.age BETWEEN 19 AND 23 AND s.gpa > 3.0",
        " WHERE s.name LIKE 'A%'",
        " WHERE s.gpa IS NOT NULL",
        " WHERE s.id IN (SELECT e.student_id FROM enrollment AS e)",
        " WHERE NOT s.age = 20",
        " WHERE s.id IN (1, 2, 3)",
        " WHERE EXISTS (SELECT 1 FROM enrollment AS e WHERE e.student_id = s.id)",
    };
    const std::vector<std::string> tails = {
        "",
        " ORDER BY s.name DESC",
        " ORDER BY s.age ASC, s.name DESC",
        " LIMIT 5",
        " ORDER BY s.gpa DESC LIMIT 2 OFFSET 1",
    };
    for (const auto& col : columns) {
        for (const auto& where : wheres) {
            for (const auto& tail : tails) {
                corpus.push_back("SELECT " + col + " FROM student AS s" + where + tail);
            }
        }
    }
    for (const auto& agg : aggs) {
        corpus.push_back("SELECT " + agg + " FROM student AS s");
        corpus.push_back("SELECT s.age, " + agg + " FROM student AS s GROUP BY s.age");
        corpus.push_back("SELECT s.age, " + agg + " FROM student AS s GROUP BY s.age HAVING " +
                         agg + " > 1");
    }
    corpus.push_back("SELECT 1");
    corpus.push_back("SELECT DISTINCT s.name, s.age FROM student AS s WHERE s.age > 18");
    corpus.push_back("SELECT COUNT(DISTINCT e.status) FROM enrollment AS e");
    corpus.push_back(
        "SELECT s.name, c.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
        "JOIN course AS c ON e.course_id = c.id WHERE c.department = 'CS' ORDER BY s.name");
    corpus.push_back(
        "SELECT t.status FROM (SELECT e.status FROM enrollment AS e WHERE e.grade > 80) AS t");
    corpus.push_back("SELECT s.name || '!' FROM student AS s");
    corpus.push_back("SELECT s.gpa * 10 + 1 FROM student AS s");
    corpus.push_back("SELECT CAST(s.gpa AS INTEGER) FROM student AS s");
    corpus.push_back("SELECT \"student\".\"name\" FROM student");
    corpus.push_back("SELECT * FROM enrollment AS e LEFT JOIN course AS c ON e.course_id = c.id");
    corpus.push_back("SELECT e.* FROM enrollment AS e CROSS JOIN course AS c");
    corpus.push_back("SELECT s.name FROM student s, enrollment e WHERE s.id = e.student_id");
    corpus.push_back("SELECT -5, 'it''s', NULL FROM student AS s");
    return corpus;
}

}  // namespace sqlrefine::testutil
